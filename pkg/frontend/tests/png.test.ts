import assert from "node:assert/strict";
import * as fs from "node:fs";
import * as path from "node:path";
import { test } from "node:test";
import { decodeGray16, decodePng, encodeGray16, encodeRgb8 } from "../src/png";

const FIXTURES = path.join(__dirname, "..", "..", "fixtures");

test("gray16 encode/decode round trip is exact", () => {
  const width = 13;
  const height = 9;
  const plane = new Float64Array(width * height);
  for (let i = 0; i < plane.length; i++) {
    plane[i] = (i % 257) / 256;
  }
  const decoded = decodeGray16(encodeGray16(plane, width, height));
  assert.equal(decoded.width, width);
  assert.equal(decoded.height, height);
  for (let i = 0; i < plane.length; i++) {
    const expected = Math.round(Math.min(1, plane[i]) * 65535) / 65535;
    assert.ok(Math.abs(decoded.plane[i] - expected) < 1e-12);
  }
});

test("rgb8 encoding is decodable with sane geometry", () => {
  const width = 5;
  const height = 4;
  const rgb = new Uint8Array(width * height * 3).map((_, i) => (i * 7) % 256);
  const png = decodePng(encodeRgb8(rgb, width, height));
  assert.equal(png.width, width);
  assert.equal(png.height, height);
  assert.equal(png.bitDepth, 8);
  assert.equal(png.colorType, 2);
  assert.deepEqual(Array.from(png.pixels), Array.from(rgb));
});

test("decodes a generator-written (Pillow) 16-bit grayscale PNG", () => {
  const expect = JSON.parse(
    fs.readFileSync(path.join(FIXTURES, "pil_gray16_expect.json"), "utf-8"),
  );
  const decoded = decodeGray16(fs.readFileSync(path.join(FIXTURES, "pil_gray16.png")));
  assert.equal(decoded.width, expect.width);
  assert.equal(decoded.height, expect.height);
  for (let y = 0; y < expect.height; y++) {
    for (let x = 0; x < expect.width; x++) {
      const value = ((y * expect.width + x) % expect.modulus) / (expect.modulus - 1);
      const quantized = Math.round(value * 65535) / 65535;
      assert.ok(
        Math.abs(decoded.plane[y * expect.width + x] - quantized) < 1e-12,
        `pixel (${x}, ${y})`,
      );
    }
  }
});

test("rejects non-png input", () => {
  assert.throws(() => decodePng(Buffer.from("definitely not a png")));
});
