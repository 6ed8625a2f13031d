// Extraction pipelines: image lists in, manifests/correspondence tables out.

import { readFileSync } from 'fs'
import {
  ManifestEntry,
  correspondencePath,
  writeCorrespondences,
  writeEmbeddingManifest,
} from './formats.js'
import { mutualNearestNeighbors } from './matching.js'
import { readImage } from './png.js'
import { STUB_ENCODER_ID, STUB_MATCHER_ID, stubEmbedding, stubKeypoints } from './stub.js'

export interface ImageListEntry {
  imageId: string
  path: string
}

/** TSV listing: image_id <TAB> path, one per line. */
export function readImageList(path: string): ImageListEntry[] {
  const out: ImageListEntry[] = []
  for (const line of readFileSync(path, 'utf-8').split('\n')) {
    const trimmed = line.trim()
    if (!trimmed) continue
    const [imageId, imagePath] = trimmed.split('\t')
    if (!imageId || !imagePath) throw new Error(`bad listing line: ${line}`)
    out.push({ imageId, path: imagePath })
  }
  return out
}

export interface PairListEntry {
  realId: string
  realPath: string
  synthId: string
  synthPath: string
}

/** TSV pair list: real_id <TAB> real_path <TAB> synth_id <TAB> synth_path. */
export function readPairList(path: string): PairListEntry[] {
  const out: PairListEntry[] = []
  for (const line of readFileSync(path, 'utf-8').split('\n')) {
    const trimmed = line.trim()
    if (!trimmed) continue
    const parts = trimmed.split('\t')
    if (parts.length !== 4) throw new Error(`bad pair line: ${line}`)
    out.push({ realId: parts[0], realPath: parts[1], synthId: parts[2], synthPath: parts[3] })
  }
  return out
}

export function extractEmbeddings(opts: {
  images: ImageListEntry[]
  encoder: string
  dim: number
  outIndex: string
  outBlob: string
}): { written: number; skipped: string[] } {
  if (opts.encoder !== 'stub') {
    throw new Error(`unknown encoder ${opts.encoder}; available: stub`)
  }
  const entries: ManifestEntry[] = []
  const skipped: string[] = []
  for (const { imageId, path } of opts.images) {
    try {
      const image = readImage(path)
      entries.push({ imageId, vector: stubEmbedding(image, opts.dim) })
    } catch (err) {
      // per-image decode failure is recorded and skipped, not fatal
      console.error(`skip ${imageId}: ${(err as Error).message}`)
      skipped.push(imageId)
    }
  }
  writeEmbeddingManifest(opts.outIndex, opts.outBlob, entries, {
    encoder: `${STUB_ENCODER_ID}/${opts.dim}`,
    preprocessing: 'raw-bytes-hash, l2-normalized',
    deterministic: true,
  })
  return { written: entries.length, skipped }
}

export function extractCorrespondences(opts: {
  pairs: PairListEntry[]
  matcher: string
  outDir: string
}): { written: number; failed: string[] } {
  if (opts.matcher !== 'stub') {
    throw new Error(`unknown matcher ${opts.matcher}; available: stub`)
  }
  const failed: string[] = []
  let written = 0
  for (const pair of opts.pairs) {
    const outPath = correspondencePath(opts.outDir, pair.realId, pair.synthId)
    try {
      const real = stubKeypoints(readImage(pair.realPath))
      const synth = stubKeypoints(readImage(pair.synthPath))
      writeCorrespondences(outPath, mutualNearestNeighbors(real, synth))
    } catch (err) {
      // matcher failure leaves an empty set behind; the core then scores the
      // pair as zero inliers and the run continues
      console.error(`pair (${pair.realId}, ${pair.synthId}) failed: ${(err as Error).message}`)
      writeCorrespondences(outPath, [])
      failed.push(`${pair.realId}__${pair.synthId}`)
    }
    written++
  }
  return { written, failed }
}
