/**
 * Penultimate-feature extraction from a tfjs LayersModel.
 *
 * The classifier head must be the model's final Dense layer; everything up to
 * the layer feeding it is treated as the embedding function h(x). Instead of
 * a forward hook we build a submodel whose output is that layer's output,
 * which is the graph-API equivalent.
 */

import * as tf from '@tensorflow/tfjs';

export interface ClassifierHead {
  /** d-by-C kernel, row-major over feature dim. */
  weights: Float32Array;
  bias: Float32Array;
  featureDim: number;
  numClasses: number;
}

export interface FeatureExtractor {
  features: tf.LayersModel;
  head: ClassifierHead;
  featureLayerName: string;
}

function layerNames(model: tf.LayersModel): string[] {
  return model.layers.map((l) => l.name);
}

/**
 * Split a model into an embedding submodel and its classifier head.
 *
 * @param featureLayer Name of the layer whose output is h(x). Defaults to
 *   the layer immediately before the final Dense layer.
 */
export function splitModel(model: tf.LayersModel, featureLayer?: string): FeatureExtractor {
  const last = model.layers[model.layers.length - 1];
  if (last.getClassName() !== 'Dense') {
    throw new Error(
      `final layer '${last.name}' is ${last.getClassName()}, expected Dense; ` +
        `layers: ${layerNames(model).join(', ')}`,
    );
  }
  const [kernel, bias] = last.getWeights();
  const [featureDim, numClasses] = kernel.shape as [number, number];

  let penultimate: tf.layers.Layer;
  if (featureLayer !== undefined) {
    try {
      penultimate = model.getLayer(featureLayer);
    } catch {
      throw new Error(
        `no layer named '${featureLayer}'; candidates: ${layerNames(model).join(', ')}`,
      );
    }
  } else {
    if (model.layers.length < 2) {
      throw new Error('model has no layer before the classifier head');
    }
    penultimate = model.layers[model.layers.length - 2];
  }

  const features = tf.model({ inputs: model.inputs, outputs: penultimate.output as tf.SymbolicTensor });
  const outShape = features.outputs[0].shape;
  const width = outShape[outShape.length - 1];
  if (width !== featureDim) {
    throw new Error(
      `layer '${penultimate.name}' has width ${width} but the head expects ${featureDim}; ` +
        `pick the layer feeding the final Dense layer`,
    );
  }

  const head: ClassifierHead = {
    weights: kernel.dataSync() as Float32Array,
    bias: bias.dataSync() as Float32Array,
    featureDim,
    numClasses,
  };
  return { features, head, featureLayerName: penultimate.name };
}

/** Batched, deterministic h(x) over a row-major input matrix. */
export function embed(extractor: FeatureExtractor, xs: Float32Array, nRows: number, batchSize: number): Float32Array {
  if (nRows === 0) {
    return new Float32Array(0);
  }
  const inputDim = xs.length / nRows;
  if (!Number.isInteger(inputDim)) {
    throw new Error(`input length ${xs.length} is not a multiple of ${nRows} rows`);
  }
  const out = new Float32Array(nRows * extractor.head.featureDim);
  for (let start = 0; start < nRows; start += batchSize) {
    const rows = Math.min(batchSize, nRows - start);
    const batch = tf.tensor2d(xs.subarray(start * inputDim, (start + rows) * inputDim), [rows, inputDim]);
    const feats = extractor.features.predict(batch, { batchSize: rows }) as tf.Tensor;
    out.set(feats.dataSync() as Float32Array, start * extractor.head.featureDim);
    batch.dispose();
    feats.dispose();
  }
  return out;
}
