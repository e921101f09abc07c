/**
 * Float formatting identical to CPython's repr(float), which is what the
 * scene generator uses when writing scene.json. Reproducing it exactly makes
 * parse -> serialize a byte-level fixed point on generator output.
 *
 * Rules: shortest round-trip digits; fixed notation while the decimal
 * exponent is in [-4, 16); otherwise scientific with a signed, >= 2 digit
 * exponent; integral values keep a trailing ".0".
 */

export function pyFloatRepr(x: number): string {
  if (!Number.isFinite(x)) {
    throw new Error(`non-finite float not representable in JSON: ${x}`);
  }
  if (x === 0) {
    return Object.is(x, -0) ? "-0.0" : "0.0";
  }
  const negative = x < 0;
  const { digits, exp10 } = shortestDigits(Math.abs(x));

  let out: string;
  if (exp10 >= -4 && exp10 < 16) {
    if (exp10 >= digits.length - 1) {
      out = digits + "0".repeat(exp10 - (digits.length - 1)) + ".0";
    } else if (exp10 >= 0) {
      out = digits.slice(0, exp10 + 1) + "." + digits.slice(exp10 + 1);
    } else {
      out = "0." + "0".repeat(-exp10 - 1) + digits;
    }
  } else {
    const mantissa = digits.length > 1 ? digits[0] + "." + digits.slice(1) : digits;
    const sign = exp10 < 0 ? "-" : "+";
    const magnitude = Math.abs(exp10).toString().padStart(2, "0");
    out = `${mantissa}e${sign}${magnitude}`;
  }
  return negative ? "-" + out : out;
}

/** Shortest decimal digits and exponent such that value = 0.D1D2... * 10^(exp10+1). */
function shortestDigits(a: number): { digits: string; exp10: number } {
  const s = a.toString();
  let digits: string;
  let exp10: number;
  if (s.includes("e")) {
    const [mantissa, exponent] = s.split("e");
    exp10 = parseInt(exponent, 10);
    digits = mantissa.replace(".", "");
  } else if (s.includes(".")) {
    const [intPart, fracPart] = s.split(".");
    if (intPart === "0") {
      const lead = /^0*/.exec(fracPart)![0].length;
      digits = fracPart.slice(lead);
      exp10 = -lead - 1;
    } else {
      digits = intPart + fracPart;
      exp10 = intPart.length - 1;
    }
  } else {
    digits = s;
    exp10 = s.length - 1;
  }
  digits = digits.replace(/0+$/, "");
  if (digits === "") {
    digits = "0";
  }
  return { digits, exp10 };
}

/** Integer formatting for int-typed schema fields (bigint-safe). */
export function pyIntRepr(x: bigint | number): string {
  if (typeof x === "bigint") {
    return x.toString();
  }
  if (!Number.isInteger(x)) {
    throw new Error(`int field holds a non-integer: ${x}`);
  }
  return x.toString();
}

/** String literal identical to json.dumps' default (ensure_ascii=True). */
export function pyJsonString(s: string): string {
  let out = '"';
  for (const ch of s) {
    const code = ch.codePointAt(0)!;
    switch (ch) {
      case '"': out += '\\"'; break;
      case "\\": out += "\\\\"; break;
      case "\n": out += "\\n"; break;
      case "\r": out += "\\r"; break;
      case "\t": out += "\\t"; break;
      case "\b": out += "\\b"; break;
      case "\f": out += "\\f"; break;
      default:
        if (code < 0x20 || code > 0x7e) {
          if (code > 0xffff) {
            const high = 0xd800 + ((code - 0x10000) >> 10);
            const low = 0xdc00 + ((code - 0x10000) & 0x3ff);
            out += `\\u${high.toString(16).padStart(4, "0")}\\u${low.toString(16).padStart(4, "0")}`;
          } else {
            out += `\\u${code.toString(16).padStart(4, "0")}`;
          }
        } else {
          out += ch;
        }
    }
  }
  return out + '"';
}
