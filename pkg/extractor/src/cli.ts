#!/usr/bin/env node
// sadge-extract: write embedding manifests / correspondence tables the core
// engine loads directly.
//
//   sadge-extract embeddings --images list.tsv --encoder stub \
//       --out-index feats/x.index --out-blob feats/x.blob [--dim 64]
//   sadge-extract correspondences --pairs pairs.tsv --matcher stub --out-dir corr/

import {
  extractCorrespondences,
  extractEmbeddings,
  readImageList,
  readPairList,
} from './extract.js'

function parseFlags(argv: string[]): Map<string, string> {
  const flags = new Map<string, string>()
  for (let i = 0; i < argv.length; i += 2) {
    const key = argv[i]
    if (!key.startsWith('--') || i + 1 >= argv.length) {
      throw new Error(`bad arguments near ${key}`)
    }
    flags.set(key.slice(2), argv[i + 1])
  }
  return flags
}

function need(flags: Map<string, string>, name: string): string {
  const value = flags.get(name)
  if (value === undefined) throw new Error(`missing --${name}`)
  return value
}

function main() {
  const [command, ...rest] = process.argv.slice(2)
  const flags = parseFlags(rest)
  if (command === 'embeddings') {
    const result = extractEmbeddings({
      images: readImageList(need(flags, 'images')),
      encoder: flags.get('encoder') ?? 'stub',
      dim: Number(flags.get('dim') ?? 64),
      outIndex: need(flags, 'out-index'),
      outBlob: need(flags, 'out-blob'),
    })
    console.error(`embeddings: wrote ${result.written}, skipped ${result.skipped.length}`)
  } else if (command === 'correspondences') {
    const result = extractCorrespondences({
      pairs: readPairList(need(flags, 'pairs')),
      matcher: flags.get('matcher') ?? 'stub',
      outDir: need(flags, 'out-dir'),
    })
    console.error(`correspondences: wrote ${result.written}, failed ${result.failed.length}`)
  } else {
    throw new Error(`unknown command ${command}; use embeddings|correspondences`)
  }
}

try {
  main()
} catch (err) {
  console.error((err as Error).message)
  process.exit(1)
}
