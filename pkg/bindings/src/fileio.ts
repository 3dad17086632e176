/** Readers/writers for the toolkit's on-disk formats. */

import { readFileSync, writeFileSync } from "node:fs";

import {
  ArrayView,
  DataFormatError,
  decodeTns1,
  encodeTns1,
  toAlignedFloat32,
} from "./tensor.js";
import type { BoxRecord, ConfigDoc } from "./types.js";

/** Raw little-endian float32 rows of (x, y, z, attrs...). */
export function readPointCloudBin(path: string, attrDim: number): ArrayView {
  const buf = readFileSync(path);
  const width = 3 + attrDim;
  if (buf.byteLength % (4 * width) !== 0) {
    throw new DataFormatError(
      `${path}: size ${buf.byteLength} is not a multiple of ${4 * width}`,
    );
  }
  const data = toAlignedFloat32(buf);
  return { shape: [data.length / width, width], dtype: "f32", data };
}

export function writePointCloudBin(path: string, cloud: ArrayView): void {
  if (cloud.dtype !== "f32") {
    throw new DataFormatError("point cloud files store float32 rows");
  }
  const d = cloud.data;
  writeFileSync(path, Buffer.from(d.buffer, d.byteOffset, d.byteLength));
}

export function readTns1(path: string): ArrayView {
  return decodeTns1(new Uint8Array(readFileSync(path)));
}

export function writeTns1(path: string, tensor: ArrayView): void {
  writeFileSync(path, encodeTns1(tensor));
}

export function readBoxesJsonl(path: string): BoxRecord[] {
  const rows: BoxRecord[] = [];
  const text = readFileSync(path, "utf8");
  text.split("\n").forEach((line, i) => {
    const trimmed = line.trim();
    if (!trimmed) return;
    try {
      rows.push(JSON.parse(trimmed) as BoxRecord);
    } catch (err) {
      throw new DataFormatError(`${path}:${i + 1}: invalid JSON: ${err}`);
    }
  });
  return rows;
}

export function writeBoxesJsonl(path: string, rows: BoxRecord[]): void {
  writeFileSync(path, rows.map((r) => JSON.stringify(r)).join("\n") + (rows.length ? "\n" : ""));
}

/** Parse the toolkit's JSON configuration document. */
export function loadConfigFile(path: string): ConfigDoc {
  return JSON.parse(readFileSync(path, "utf8")) as ConfigDoc;
}
