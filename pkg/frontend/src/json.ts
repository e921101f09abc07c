/**
 * JSON parser that keeps number tokens as raw text.
 *
 * scene.json seeds are 63-bit integers; JSON.parse would silently round them
 * through a double. The schema layer decides per field whether a token is an
 * exact integer (bigint) or a float.
 */

export class RawNumber {
  constructor(public readonly raw: string) {}

  asFloat(): number {
    return Number(this.raw);
  }

  asInt(): bigint {
    if (!/^-?\d+$/.test(this.raw)) {
      throw new Error(`expected integer token, got ${this.raw}`);
    }
    return BigInt(this.raw);
  }

  asSmallInt(): number {
    const big = this.asInt();
    if (big > BigInt(Number.MAX_SAFE_INTEGER) || big < -BigInt(Number.MAX_SAFE_INTEGER)) {
      throw new Error(`integer too large for a plain number: ${this.raw}`);
    }
    return Number(big);
  }
}

export type RawJson =
  | null
  | boolean
  | string
  | RawNumber
  | RawJson[]
  | { [key: string]: RawJson };

export function parseRawJson(text: string): RawJson {
  const parser = new Parser(text);
  const value = parser.parseValue();
  parser.skipWhitespace();
  if (!parser.done()) {
    throw new Error(`trailing content at offset ${parser.pos}`);
  }
  return value;
}

class Parser {
  pos = 0;

  constructor(private readonly text: string) {}

  done(): boolean {
    return this.pos >= this.text.length;
  }

  skipWhitespace(): void {
    while (this.pos < this.text.length && " \t\n\r".includes(this.text[this.pos])) {
      this.pos++;
    }
  }

  parseValue(): RawJson {
    this.skipWhitespace();
    const c = this.text[this.pos];
    if (c === "{") return this.parseObject();
    if (c === "[") return this.parseArray();
    if (c === '"') return this.parseString();
    if (c === "t" || c === "f") return this.parseBoolean();
    if (c === "n") return this.parseNull();
    if (c === "-" || (c >= "0" && c <= "9")) return this.parseNumber();
    throw new Error(`unexpected character ${JSON.stringify(c)} at offset ${this.pos}`);
  }

  private expect(c: string): void {
    if (this.text[this.pos] !== c) {
      throw new Error(`expected ${JSON.stringify(c)} at offset ${this.pos}`);
    }
    this.pos++;
  }

  private parseObject(): { [key: string]: RawJson } {
    this.expect("{");
    const out: { [key: string]: RawJson } = {};
    this.skipWhitespace();
    if (this.text[this.pos] === "}") {
      this.pos++;
      return out;
    }
    for (;;) {
      this.skipWhitespace();
      const key = this.parseString();
      this.skipWhitespace();
      this.expect(":");
      out[key] = this.parseValue();
      this.skipWhitespace();
      if (this.text[this.pos] === ",") {
        this.pos++;
        continue;
      }
      this.expect("}");
      return out;
    }
  }

  private parseArray(): RawJson[] {
    this.expect("[");
    const out: RawJson[] = [];
    this.skipWhitespace();
    if (this.text[this.pos] === "]") {
      this.pos++;
      return out;
    }
    for (;;) {
      out.push(this.parseValue());
      this.skipWhitespace();
      if (this.text[this.pos] === ",") {
        this.pos++;
        continue;
      }
      this.expect("]");
      return out;
    }
  }

  private parseString(): string {
    this.expect('"');
    let out = "";
    while (this.pos < this.text.length) {
      const c = this.text[this.pos];
      if (c === '"') {
        this.pos++;
        return out;
      }
      if (c === "\\") {
        const next = this.text[this.pos + 1];
        this.pos += 2;
        switch (next) {
          case '"': out += '"'; break;
          case "\\": out += "\\"; break;
          case "/": out += "/"; break;
          case "b": out += "\b"; break;
          case "f": out += "\f"; break;
          case "n": out += "\n"; break;
          case "r": out += "\r"; break;
          case "t": out += "\t"; break;
          case "u": {
            const hex = this.text.slice(this.pos, this.pos + 4);
            out += String.fromCharCode(parseInt(hex, 16));
            this.pos += 4;
            break;
          }
          default:
            throw new Error(`bad escape \\${next} at offset ${this.pos}`);
        }
        continue;
      }
      out += c;
      this.pos++;
    }
    throw new Error("unterminated string");
  }

  private parseBoolean(): boolean {
    if (this.text.startsWith("true", this.pos)) {
      this.pos += 4;
      return true;
    }
    if (this.text.startsWith("false", this.pos)) {
      this.pos += 5;
      return false;
    }
    throw new Error(`bad literal at offset ${this.pos}`);
  }

  private parseNull(): null {
    if (this.text.startsWith("null", this.pos)) {
      this.pos += 4;
      return null;
    }
    throw new Error(`bad literal at offset ${this.pos}`);
  }

  private parseNumber(): RawNumber {
    const match = /^-?(?:0|[1-9]\d*)(?:\.\d+)?(?:[eE][+-]?\d+)?/.exec(this.text.slice(this.pos));
    if (!match) {
      throw new Error(`bad number at offset ${this.pos}`);
    }
    this.pos += match[0].length;
    return new RawNumber(match[0]);
  }
}
