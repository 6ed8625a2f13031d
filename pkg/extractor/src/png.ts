// Minimal PNG header inspection (no pixel decode needed by the stub models).

import { readFileSync } from 'fs'

const PNG_MAGIC = Buffer.from([0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a])

export interface ImageInfo {
  width: number
  height: number
  bytes: Buffer
}

export function readImage(path: string): ImageInfo {
  const bytes = readFileSync(path)
  if (bytes.length < 24 || !bytes.subarray(0, 8).equals(PNG_MAGIC)) {
    throw new Error(`not a PNG file: ${path}`)
  }
  // IHDR is always the first chunk: width/height at byte offsets 16/20
  const width = bytes.readUInt32BE(16)
  const height = bytes.readUInt32BE(20)
  if (width < 1 || height < 1) {
    throw new Error(`bad PNG dimensions in ${path}`)
  }
  return { width, height, bytes }
}
