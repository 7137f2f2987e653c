/**
 * Build a small deterministic stand-in network with tap points at the
 * standard feature widths (64 / 192 / 768 / 2048 channels) and save it in
 * tfjs layers format. It is not a trained classifier; it exists so the
 * extraction pipeline can run fully offline and deterministically.
 */

import * as tf from '@tensorflow/tfjs'

import { diskSaveHandler } from './model'

export async function makeTestModel(dir: string, seed = 1234): Promise<void> {
  await tf.setBackend('cpu')
  const init = (offset: number) => tf.initializers.heNormal({ seed: seed + offset })
  const input = tf.input({ shape: [32, 32, 3] })
  let x = tf.layers
    .conv2d({
      filters: 64, kernelSize: 3, strides: 2, padding: 'same', activation: 'relu',
      kernelInitializer: init(0), name: 'block1_64',
    })
    .apply(input) as tf.SymbolicTensor
  x = tf.layers
    .conv2d({
      filters: 192, kernelSize: 1, activation: 'relu',
      kernelInitializer: init(1), name: 'block2_192',
    })
    .apply(x) as tf.SymbolicTensor
  x = tf.layers.averagePooling2d({ poolSize: 2, name: 'pool2' }).apply(x) as tf.SymbolicTensor
  x = tf.layers
    .conv2d({
      filters: 768, kernelSize: 1, activation: 'relu',
      kernelInitializer: init(2), name: 'block3_768',
    })
    .apply(x) as tf.SymbolicTensor
  x = tf.layers.averagePooling2d({ poolSize: 2, name: 'pool3' }).apply(x) as tf.SymbolicTensor
  x = tf.layers
    .conv2d({
      filters: 2048, kernelSize: 1,
      kernelInitializer: init(3), name: 'block4_2048',
    })
    .apply(x) as tf.SymbolicTensor
  const model = tf.model({ inputs: input, outputs: x })
  await model.save(diskSaveHandler(dir))
}

if (require.main === module) {
  const dir = process.argv[2]
  if (!dir) {
    console.error('usage: make-test-model <output-dir>')
    process.exit(64)
  }
  makeTestModel(dir).then(
    () => console.log(`wrote test model to ${dir}`),
    err => {
      console.error(err)
      process.exit(1)
    },
  )
}
