#!/usr/bin/env node
/**
 * s2rf-extract: deep-feature extraction and S2RF file utilities.
 *
 *   extract --input <dir> --output <file.s2rf> --model <dir> [--d 2048]
 *           [--batch-size 8] [--device cpu]
 *   verify  <file.s2rf>
 *   merge   --output <file.s2rf> <shard1.s2rf> <shard2.s2rf> ...
 */

import { extractDeepFeatures } from './extract'
import { DIMENSIONALITIES, Dimensionality } from './model'
import { mergeFeatureFiles, verifyFile } from './s2rf'

interface Flags {
  [key: string]: string
}

function parseFlags(argv: string[]): { flags: Flags; positional: string[] } {
  const flags: Flags = {}
  const positional: string[] = []
  for (let i = 0; i < argv.length; i++) {
    const arg = argv[i]
    if (arg.startsWith('--')) {
      const value = argv[i + 1]
      if (value === undefined || value.startsWith('--')) {
        throw new Error(`flag ${arg} needs a value`)
      }
      flags[arg.slice(2)] = value
      i++
    } else {
      positional.push(arg)
    }
  }
  return { flags, positional }
}

function usage(): void {
  console.error(
    'usage:\n' +
      '  s2rf-extract extract --input <dir> --output <file.s2rf> --model <dir> [--d 2048] [--batch-size 8]\n' +
      '  s2rf-extract verify <file.s2rf>\n' +
      '  s2rf-extract merge --output <file.s2rf> <shards...>',
  )
}

async function main(): Promise<number> {
  const [command, ...rest] = process.argv.slice(2)
  if (!command) {
    usage()
    return 64
  }
  try {
    const { flags, positional } = parseFlags(rest)
    if (command === 'extract') {
      for (const required of ['input', 'output', 'model']) {
        if (!flags[required]) throw new Error(`--${required} is required`)
      }
      const d = parseInt(flags.d ?? '2048', 10)
      if (!(DIMENSIONALITIES as readonly number[]).includes(d)) {
        throw new Error(`--d must be one of ${DIMENSIONALITIES.join(', ')}`)
      }
      const { features, manifest } = await extractDeepFeatures({
        inputDir: flags.input,
        outputPath: flags.output,
        modelDir: flags.model,
        dimensionality: d as Dimensionality,
        batchSize: flags['batch-size'] ? parseInt(flags['batch-size'], 10) : undefined,
        device: flags.device,
      })
      console.log(
        JSON.stringify({
          output: flags.output,
          n: features.n,
          d: features.d,
          tapLayer: manifest.tapLayer,
          skipped: manifest.skipped.length,
        }),
      )
      return 0
    }
    if (command === 'verify') {
      if (positional.length !== 1) {
        throw new Error('verify takes exactly one file')
      }
      const report = verifyFile(positional[0])
      console.log(JSON.stringify(report))
      return report.ok ? 0 : 1
    }
    if (command === 'merge') {
      if (!flags.output) throw new Error('--output is required')
      if (positional.length === 0) throw new Error('no shard files given')
      const merged = mergeFeatureFiles(positional, flags.output)
      console.log(JSON.stringify({ output: flags.output, n: merged.n, d: merged.d }))
      return 0
    }
    usage()
    return 64
  } catch (err) {
    console.error(`error: ${(err as Error).message}`)
    return 1
  }
}

main().then(code => {
  process.exitCode = code
})
