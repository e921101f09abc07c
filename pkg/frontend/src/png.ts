/**
 * Minimal PNG codec: enough to write 8-bit RGB / 16-bit grayscale images and
 * to read back the 16-bit grayscale region maps the generator produces
 * (arbitrary scanline filters, no interlacing, no palette).
 */

import * as zlib from "zlib";

const SIGNATURE = Buffer.from([0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a]);

const CRC_TABLE = (() => {
  const table = new Uint32Array(256);
  for (let n = 0; n < 256; n++) {
    let c = n;
    for (let k = 0; k < 8; k++) {
      c = c & 1 ? 0xedb88320 ^ (c >>> 1) : c >>> 1;
    }
    table[n] = c >>> 0;
  }
  return table;
})();

function crc32(data: Buffer): number {
  let c = 0xffffffff;
  for (const byte of data) {
    c = CRC_TABLE[(c ^ byte) & 0xff] ^ (c >>> 8);
  }
  return (c ^ 0xffffffff) >>> 0;
}

function chunk(type: string, data: Buffer): Buffer {
  const header = Buffer.alloc(4);
  header.writeUInt32BE(data.length);
  const body = Buffer.concat([Buffer.from(type, "ascii"), data]);
  const crc = Buffer.alloc(4);
  crc.writeUInt32BE(crc32(body));
  return Buffer.concat([header, body, crc]);
}

function ihdr(width: number, height: number, bitDepth: number, colorType: number): Buffer {
  const data = Buffer.alloc(13);
  data.writeUInt32BE(width, 0);
  data.writeUInt32BE(height, 4);
  data.writeUInt8(bitDepth, 8);
  data.writeUInt8(colorType, 9);
  return data;
}

/** rgb: Uint8Array of length width*height*3, row-major. */
export function encodeRgb8(rgb: Uint8Array, width: number, height: number): Buffer {
  const stride = width * 3;
  const raw = Buffer.alloc((stride + 1) * height);
  for (let y = 0; y < height; y++) {
    raw[y * (stride + 1)] = 0; // filter: none
    raw.set(rgb.subarray(y * stride, (y + 1) * stride), y * (stride + 1) + 1);
  }
  return Buffer.concat([
    SIGNATURE,
    chunk("IHDR", ihdr(width, height, 8, 2)),
    chunk("IDAT", zlib.deflateSync(raw, { level: 6 })),
    chunk("IEND", Buffer.alloc(0)),
  ]);
}

/** plane: Float64Array/number[] of width*height values in [0, 1]. */
export function encodeGray16(plane: ArrayLike<number>, width: number, height: number): Buffer {
  const stride = width * 2;
  const raw = Buffer.alloc((stride + 1) * height);
  for (let y = 0; y < height; y++) {
    const row = y * (stride + 1);
    raw[row] = 0;
    for (let x = 0; x < width; x++) {
      const v = Math.max(0, Math.min(1, plane[y * width + x]));
      raw.writeUInt16BE(Math.round(v * 65535), row + 1 + x * 2);
    }
  }
  return Buffer.concat([
    SIGNATURE,
    chunk("IHDR", ihdr(width, height, 16, 0)),
    chunk("IDAT", zlib.deflateSync(raw, { level: 6 })),
    chunk("IEND", Buffer.alloc(0)),
  ]);
}

export interface DecodedPng {
  width: number;
  height: number;
  bitDepth: number;
  colorType: number;
  /** Unfiltered raw samples, scanline-major, big-endian for 16-bit. */
  pixels: Buffer;
}

export function decodePng(data: Buffer): DecodedPng {
  if (!data.subarray(0, 8).equals(SIGNATURE)) {
    throw new Error("not a PNG file");
  }
  let pos = 8;
  let width = 0;
  let height = 0;
  let bitDepth = 0;
  let colorType = 0;
  const idat: Buffer[] = [];
  while (pos < data.length) {
    const length = data.readUInt32BE(pos);
    const type = data.subarray(pos + 4, pos + 8).toString("ascii");
    const body = data.subarray(pos + 8, pos + 8 + length);
    if (type === "IHDR") {
      width = body.readUInt32BE(0);
      height = body.readUInt32BE(4);
      bitDepth = body.readUInt8(8);
      colorType = body.readUInt8(9);
      if (body.readUInt8(12) !== 0) {
        throw new Error("interlaced PNG not supported");
      }
    } else if (type === "IDAT") {
      idat.push(Buffer.from(body));
    } else if (type === "IEND") {
      break;
    }
    pos += 12 + length;
  }
  const channels = { 0: 1, 2: 3, 4: 2, 6: 4 }[colorType as 0 | 2 | 4 | 6];
  if (channels === undefined || (bitDepth !== 8 && bitDepth !== 16)) {
    throw new Error(`unsupported PNG layout: depth ${bitDepth} color type ${colorType}`);
  }
  const raw = zlib.inflateSync(Buffer.concat(idat));
  const bytesPerPixel = (channels * bitDepth) / 8;
  const stride = width * bytesPerPixel;
  const pixels = Buffer.alloc(stride * height);
  for (let y = 0; y < height; y++) {
    const filter = raw[y * (stride + 1)];
    const line = raw.subarray(y * (stride + 1) + 1, (y + 1) * (stride + 1));
    const out = pixels.subarray(y * stride, (y + 1) * stride);
    const prev = y > 0 ? pixels.subarray((y - 1) * stride, y * stride) : null;
    unfilterLine(filter, line, out, prev, bytesPerPixel);
  }
  return { width, height, bitDepth, colorType, pixels };
}

function unfilterLine(
  filter: number,
  line: Buffer,
  out: Buffer,
  prev: Buffer | null,
  bpp: number,
): void {
  const up = (i: number) => (prev ? prev[i] : 0);
  const left = (i: number) => (i >= bpp ? out[i - bpp] : 0);
  const upLeft = (i: number) => (prev && i >= bpp ? prev[i - bpp] : 0);
  switch (filter) {
    case 0:
      line.copy(out);
      break;
    case 1:
      for (let i = 0; i < line.length; i++) out[i] = (line[i] + left(i)) & 0xff;
      break;
    case 2:
      for (let i = 0; i < line.length; i++) out[i] = (line[i] + up(i)) & 0xff;
      break;
    case 3:
      for (let i = 0; i < line.length; i++) {
        out[i] = (line[i] + ((left(i) + up(i)) >> 1)) & 0xff;
      }
      break;
    case 4:
      for (let i = 0; i < line.length; i++) {
        out[i] = (line[i] + paeth(left(i), up(i), upLeft(i))) & 0xff;
      }
      break;
    default:
      throw new Error(`unknown PNG filter ${filter}`);
  }
}

function paeth(a: number, b: number, c: number): number {
  const p = a + b - c;
  const pa = Math.abs(p - a);
  const pb = Math.abs(p - b);
  const pc = Math.abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

/** Decode a 16-bit grayscale PNG into floats in [0, 1]. */
export function decodeGray16(data: Buffer): { width: number; height: number; plane: Float64Array } {
  const png = decodePng(data);
  if (png.colorType !== 0 || png.bitDepth !== 16) {
    throw new Error(`expected 16-bit grayscale, got depth ${png.bitDepth} type ${png.colorType}`);
  }
  const plane = new Float64Array(png.width * png.height);
  for (let i = 0; i < plane.length; i++) {
    plane[i] = png.pixels.readUInt16BE(i * 2) / 65535;
  }
  return { width: png.width, height: png.height, plane };
}
