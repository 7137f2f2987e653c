/**
 * Batch deep-feature extraction over an image directory into an S2RF file.
 *
 * Rows follow sorted filename order (the pairing contract of the metrics
 * package). Undecodable images are skipped with a warning and recorded in
 * the manifest written next to the output file.
 */

import * as fs from 'fs'
import * as path from 'path'
import * as tf from '@tensorflow/tfjs'

import { decodeImage, listImagesSorted } from './images'
import { Dimensionality, Extractor, loadExtractor, pooledFeatures } from './model'
import { FeatureMatrix, writeFeatureFile } from './s2rf'

export interface ExtractorConfig {
  inputDir: string
  outputPath: string
  dimensionality: Dimensionality
  batchSize?: number
  /** informational only; execution is tfjs CPU */
  device?: string
  modelDir: string
}

export interface ExtractionManifest {
  inputDir: string
  modelDir: string
  tapLayer: string
  dimensionality: number
  rows: string[]
  skipped: { file: string; reason: string }[]
  preprocessing: {
    resize: [number, number]
    interpolation: string
    range: string
    channelOrder: string
  }
}

/** Scale 8-bit samples to [-1, 1] and resize to the network input. */
function toInputTensor(
  img: { width: number; height: number; channels: number; data: Uint8Array },
  extractor: Extractor,
): tf.Tensor3D {
  return tf.tidy(() => {
    let t = tf.tensor3d(img.data, [img.height, img.width, img.channels], 'float32')
    if (img.channels === 1 && extractor.inputChannels === 3) {
      t = tf.tile(t, [1, 1, 3])
    } else if (img.channels === 3 && extractor.inputChannels === 1) {
      // BT.601 luminance, matching the metrics package
      const [r, g, b] = tf.split(t, 3, 2)
      t = tf.add(tf.add(tf.mul(r, 0.299), tf.mul(g, 0.587)), tf.mul(b, 0.114))
    }
    const resized = tf.image.resizeBilinear(
      t as tf.Tensor3D,
      [extractor.inputHeight, extractor.inputWidth],
      false,
      true,
    )
    return tf.sub(tf.div(resized, 127.5), 1.0) as tf.Tensor3D
  })
}

export async function extractDeepFeatures(
  cfg: ExtractorConfig,
): Promise<{ features: FeatureMatrix; manifest: ExtractionManifest }> {
  const extractor = await loadExtractor(cfg.modelDir, cfg.dimensionality)
  const batchSize = cfg.batchSize ?? 8
  if (batchSize < 1) throw new Error(`batch size must be >= 1, got ${batchSize}`)

  const files = listImagesSorted(cfg.inputDir)
  if (files.length === 0) {
    throw new Error(`no images found in ${cfg.inputDir}`)
  }

  const rows: string[] = []
  const skipped: { file: string; reason: string }[] = []
  const chunks: Float32Array[] = []
  let pending: tf.Tensor3D[] = []

  const flush = async () => {
    if (pending.length === 0) return
    const batch = tf.stack(pending) as tf.Tensor4D
    pending.forEach(t => t.dispose())
    pending = []
    const activation = extractor.model.predict(batch, { batchSize: batch.shape[0] }) as tf.Tensor
    const pooled = pooledFeatures(activation)
    const data = (await pooled.data()) as Float32Array
    chunks.push(new Float32Array(data))
    batch.dispose()
    activation.dispose()
    pooled.dispose()
  }

  for (const file of files) {
    let decoded
    try {
      decoded = decodeImage(file)
    } catch (err) {
      const reason = (err as Error).message
      console.warn(`warning: skipping ${file}: ${reason}`)
      skipped.push({ file: path.basename(file), reason })
      continue
    }
    pending.push(toInputTensor(decoded, extractor))
    rows.push(path.basename(file))
    if (pending.length >= batchSize) {
      await flush()
    }
  }
  await flush()

  if (rows.length === 0) {
    throw new Error(`every image in ${cfg.inputDir} failed to decode`)
  }

  const d = cfg.dimensionality
  const values = new Float32Array(rows.length * d)
  let offset = 0
  for (const chunk of chunks) {
    values.set(chunk, offset)
    offset += chunk.length
  }
  const features: FeatureMatrix = { n: rows.length, d, values }
  writeFeatureFile(features, cfg.outputPath)

  const manifest: ExtractionManifest = {
    inputDir: cfg.inputDir,
    modelDir: cfg.modelDir,
    tapLayer: extractor.tapLayer,
    dimensionality: d,
    rows,
    skipped,
    preprocessing: {
      resize: [extractor.inputHeight, extractor.inputWidth],
      interpolation: 'bilinear, half-pixel centers',
      range: '[-1, 1]',
      channelOrder: 'RGB',
    },
  }
  fs.writeFileSync(manifestPath(cfg.outputPath), JSON.stringify(manifest, null, 2) + '\n')
  return { features, manifest }
}

export function manifestPath(outputPath: string): string {
  return outputPath + '.manifest.json'
}
