/**
 * Local-filesystem loading of a pretrained tfjs layers model and resolution
 * of the feature tap points.
 *
 * The extractor never fetches weights over the network: the model directory
 * must hold model.json plus its weight shards. Each supported feature
 * dimensionality maps to one layer whose channel count matches; spatial
 * outputs are global-average-pooled to a single vector per image.
 */

import * as fs from 'fs'
import * as path from 'path'
import * as tf from '@tensorflow/tfjs'

export const DIMENSIONALITIES = [64, 192, 768, 2048] as const
export type Dimensionality = (typeof DIMENSIONALITIES)[number]

export function diskSaveHandler(dir: string): tf.io.IOHandler {
  return {
    save: async (artifacts: tf.io.ModelArtifacts) => {
      fs.mkdirSync(dir, { recursive: true })
      const weightsManifest = [{ paths: ['weights.bin'], weights: artifacts.weightSpecs ?? [] }]
      const modelJson = {
        format: 'layers-model',
        generatedBy: 's2rf-feature-adapter',
        convertedBy: null,
        modelTopology: artifacts.modelTopology,
        weightsManifest,
      }
      fs.writeFileSync(path.join(dir, 'model.json'), JSON.stringify(modelJson))
      const weightData = artifacts.weightData as ArrayBuffer
      fs.writeFileSync(path.join(dir, 'weights.bin'), Buffer.from(new Uint8Array(weightData)))
      return {
        modelArtifactsInfo: {
          dateSaved: new Date(),
          modelTopologyType: 'JSON' as const,
        },
      }
    },
  }
}

export function diskLoadHandler(dir: string): tf.io.IOHandler {
  return {
    load: async () => {
      const modelPath = path.join(dir, 'model.json')
      if (!fs.existsSync(modelPath)) {
        throw new Error(`missing weights: ${modelPath} not found (no network fetch is attempted)`)
      }
      const modelJson = JSON.parse(fs.readFileSync(modelPath, 'utf-8'))
      const groups = modelJson.weightsManifest as Array<{ paths: string[]; weights: tf.io.WeightsManifestEntry[] }>
      const weightSpecs = groups.flatMap(g => g.weights)
      const buffers = groups.flatMap(g => g.paths).map(p => fs.readFileSync(path.join(dir, p)))
      const weightData = Buffer.concat(buffers)
      return {
        modelTopology: modelJson.modelTopology,
        weightSpecs,
        weightData: weightData.buffer.slice(
          weightData.byteOffset,
          weightData.byteOffset + weightData.byteLength,
        ),
      }
    },
  }
}

export interface Extractor {
  model: tf.LayersModel
  tapLayer: string
  d: Dimensionality
  inputHeight: number
  inputWidth: number
  inputChannels: number
}

function channelCount(layer: tf.layers.Layer): number | null {
  const shape = layer.outputShape
  if (Array.isArray(shape) && shape.length > 0 && !Array.isArray(shape[0])) {
    const last = (shape as Array<number | null>)[shape.length - 1]
    return typeof last === 'number' ? last : null
  }
  return null
}

/**
 * Resolve the tap layer for a dimensionality: an explicit taps.json
 * ({"64": "layer_name", ...}) wins; otherwise the first layer whose output
 * channel count equals d (successive blocks enumerate in build order).
 */
export function resolveTapLayer(model: tf.LayersModel, modelDir: string, d: Dimensionality): string {
  const tapsPath = path.join(modelDir, 'taps.json')
  if (fs.existsSync(tapsPath)) {
    const taps = JSON.parse(fs.readFileSync(tapsPath, 'utf-8')) as Record<string, string>
    const name = taps[String(d)]
    if (!name) {
      throw new Error(`taps.json does not define a tap for d=${d}`)
    }
    if (!model.layers.some(l => l.name === name)) {
      throw new Error(`taps.json names unknown layer ${name}`)
    }
    return name
  }
  for (const layer of model.layers) {
    if (channelCount(layer) === d) return layer.name
  }
  throw new Error(`no layer with ${d} output channels; add a taps.json to the model directory`)
}

export async function loadExtractor(modelDir: string, d: Dimensionality): Promise<Extractor> {
  if (!(DIMENSIONALITIES as readonly number[]).includes(d)) {
    throw new Error(`dimensionality must be one of ${DIMENSIONALITIES.join(', ')}, got ${d}`)
  }
  await tf.setBackend('cpu')
  const base = await tf.loadLayersModel(diskLoadHandler(modelDir))
  const tapLayer = resolveTapLayer(base, modelDir, d)
  const tap = base.getLayer(tapLayer)
  const model = tf.model({ inputs: base.inputs, outputs: tap.output as tf.SymbolicTensor })
  const inputShape = base.inputs[0].shape
  return {
    model,
    tapLayer,
    d,
    inputHeight: inputShape[1] as number,
    inputWidth: inputShape[2] as number,
    inputChannels: inputShape[3] as number,
  }
}

/** Pool a tap activation batch to [batch, d] (global average over space). */
export function pooledFeatures(activation: tf.Tensor): tf.Tensor2D {
  if (activation.rank === 4) {
    return tf.mean(activation as tf.Tensor4D, [1, 2]) as tf.Tensor2D
  }
  if (activation.rank === 2) {
    return activation as tf.Tensor2D
  }
  throw new Error(`unsupported tap activation rank ${activation.rank}`)
}
