// Stub encoder and matcher: hash-based pseudo features.
//
// Both are pure functions of the image file bytes, so re-running extraction
// is bit-identical, identical images always agree perfectly, and nothing has
// to be downloaded. They exist so the full cross-component contract (manifest
// formats, correspondence tables, core-side verification) is testable in CI;
// real encoder/matcher adapters plug in behind the same interfaces.

import { createHash } from 'crypto'
import { ImageInfo } from './png.js'

export const STUB_ENCODER_ID = 'stub-sha256'
export const STUB_MATCHER_ID = 'stub-grid-sha256'

function hashFloats(seedParts: (string | Buffer)[], count: number): Float64Array {
  // deterministic stream of floats in [-1, 1): sha256 counter mode
  const out = new Float64Array(count)
  let produced = 0
  let counter = 0
  while (produced < count) {
    const h = createHash('sha256')
    for (const part of seedParts) h.update(part)
    h.update(String(counter))
    const digest = h.digest()
    for (let i = 0; i + 4 <= digest.length && produced < count; i += 4) {
      out[produced++] = digest.readUInt32LE(i) / 2 ** 31 - 1.0
    }
    counter++
  }
  return out
}

export function stubEmbedding(image: ImageInfo, dim: number): Float32Array {
  const raw = hashFloats([STUB_ENCODER_ID, image.bytes], dim)
  let norm = 0
  for (const v of raw) norm += v * v
  norm = Math.sqrt(norm) || 1
  const out = new Float32Array(dim)
  for (let i = 0; i < dim; i++) out[i] = raw[i] / norm
  return out
}

export interface Keypoint {
  x: number
  y: number
  descriptor: Float64Array
}

/** Pseudo-keypoints on a jittered grid with hash descriptors. */
export function stubKeypoints(
  image: ImageInfo,
  gridSize = 8,
  descriptorDim = 16,
): Keypoint[] {
  const margin = 4
  const spanX = Math.max(image.width - 2 * margin, 1)
  const spanY = Math.max(image.height - 2 * margin, 1)
  const jitter = hashFloats([STUB_MATCHER_ID, 'kp', image.bytes], gridSize * gridSize * 2)
  const out: Keypoint[] = []
  for (let gy = 0; gy < gridSize; gy++) {
    for (let gx = 0; gx < gridSize; gx++) {
      const i = gy * gridSize + gx
      const fx = (gx + 0.5) / gridSize + (jitter[2 * i] * 0.3) / gridSize
      const fy = (gy + 0.5) / gridSize + (jitter[2 * i + 1] * 0.3) / gridSize
      const x = Math.round((margin + fx * spanX) * 100) / 100
      const y = Math.round((margin + fy * spanY) * 100) / 100
      out.push({
        x,
        y,
        descriptor: hashFloats([STUB_MATCHER_ID, 'desc', image.bytes, String(i)], descriptorDim),
      })
    }
  }
  return out
}
