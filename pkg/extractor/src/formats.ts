// Wire formats consumed by the core engine.
//
// Embedding manifest: `<name>.index` holds JSON lines
// {"image_id", "offset_bytes", "dim"} with an optional leading
// {"meta": {...}} provenance line; `<name>.blob` holds float32 LE vectors,
// contiguous, no padding.
//
// Correspondence set: CSV with header `x1,y1,x2,y2`, one tentative match per
// row in pixel coordinates of the (real, synthetic) pair.

import { mkdirSync, writeFileSync } from 'fs'
import { dirname } from 'path'

export interface ManifestEntry {
  imageId: string
  vector: Float32Array
}

export function writeEmbeddingManifest(
  indexPath: string,
  blobPath: string,
  entries: ManifestEntry[],
  meta: Record<string, unknown>,
) {
  mkdirSync(dirname(indexPath), { recursive: true })
  mkdirSync(dirname(blobPath), { recursive: true })
  const indexLines: string[] = [JSON.stringify({ meta })]
  const blobs: Buffer[] = []
  let offset = 0
  for (const { imageId, vector } of entries) {
    const buf = Buffer.alloc(vector.length * 4)
    for (let i = 0; i < vector.length; i++) {
      buf.writeFloatLE(vector[i], i * 4)
    }
    indexLines.push(
      JSON.stringify({
        image_id: imageId,
        offset_bytes: offset,
        dim: vector.length,
      }),
    )
    blobs.push(buf)
    offset += buf.length
  }
  writeFileSync(indexPath, indexLines.join('\n') + '\n')
  writeFileSync(blobPath, Buffer.concat(blobs))
}

export type Match = [number, number, number, number]

export function writeCorrespondences(path: string, matches: Match[]) {
  mkdirSync(dirname(path), { recursive: true })
  const lines = ['x1,y1,x2,y2']
  for (const [x1, y1, x2, y2] of matches) {
    lines.push(`${x1},${y1},${x2},${y2}`)
  }
  writeFileSync(path, lines.join('\n') + '\n')
}

export function correspondencePath(dir: string, realId: string, synthId: string) {
  return `${dir}/${realId}__${synthId}.csv`
}
