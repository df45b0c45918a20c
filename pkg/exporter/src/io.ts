/**
 * Disk IO for tfjs models and JSON datasets in plain Node (no tfjs-node
 * binding): a custom IOHandler reads/writes the standard model.json +
 * weights.bin layout.
 */

import * as fs from 'node:fs';
import * as path from 'node:path';
import * as tf from '@tensorflow/tfjs';

import { Dataset } from './export.js';

export async function loadModelFromDisk(modelJsonPath: string): Promise<tf.LayersModel> {
  const handler: tf.io.IOHandler = {
    load: async () => {
      const dir = path.dirname(modelJsonPath);
      const modelJson = JSON.parse(fs.readFileSync(modelJsonPath, 'utf8'));
      const weightSpecs: tf.io.WeightsManifestEntry[] = [];
      const buffers: Buffer[] = [];
      for (const group of modelJson.weightsManifest ?? []) {
        weightSpecs.push(...group.weights);
        for (const p of group.paths) {
          buffers.push(fs.readFileSync(path.join(dir, p)));
        }
      }
      const joined = Buffer.concat(buffers);
      return {
        modelTopology: modelJson.modelTopology,
        weightSpecs,
        weightData: joined.buffer.slice(joined.byteOffset, joined.byteOffset + joined.byteLength),
        format: modelJson.format,
        generatedBy: modelJson.generatedBy,
        convertedBy: modelJson.convertedBy,
      };
    },
  };
  return tf.loadLayersModel(handler);
}

export async function saveModelToDisk(model: tf.LayersModel, dir: string): Promise<string> {
  fs.mkdirSync(dir, { recursive: true });
  await model.save(
    tf.io.withSaveHandler(async (artifacts) => {
      const weightData = artifacts.weightData as ArrayBuffer;
      fs.writeFileSync(path.join(dir, 'weights.bin'), Buffer.from(weightData));
      const modelJson = {
        modelTopology: artifacts.modelTopology,
        format: artifacts.format,
        generatedBy: artifacts.generatedBy,
        convertedBy: artifacts.convertedBy,
        weightsManifest: [{ paths: ['weights.bin'], weights: artifacts.weightSpecs }],
      };
      fs.writeFileSync(path.join(dir, 'model.json'), JSON.stringify(modelJson));
      return { modelArtifactsInfo: { dateSaved: new Date(), modelTopologyType: 'JSON' } };
    }),
  );
  return path.join(dir, 'model.json');
}

/**
 * Read a dataset from JSON: {"features": [[...], ...], "labels": [...]?}.
 * Features must be rectangular; labels, when present, integral.
 */
export function loadDatasetJson(filePath: string): Dataset {
  const raw = JSON.parse(fs.readFileSync(filePath, 'utf8'));
  if (!Array.isArray(raw.features)) {
    throw new Error(`${filePath}: 'features' must be an array of rows`);
  }
  const n = raw.features.length;
  const dim = n > 0 ? raw.features[0].length : 0;
  const xs = new Float32Array(n * dim);
  for (let i = 0; i < n; i++) {
    const row = raw.features[i];
    if (!Array.isArray(row) || row.length !== dim) {
      throw new Error(`${filePath}: row ${i} has length ${row?.length}, expected ${dim}`);
    }
    xs.set(row, i * dim);
  }
  let labels: Int32Array | undefined;
  if (raw.labels !== undefined) {
    if (!Array.isArray(raw.labels) || raw.labels.some((l: unknown) => !Number.isInteger(l))) {
      throw new Error(`${filePath}: 'labels' must be an array of integers`);
    }
    labels = Int32Array.from(raw.labels);
  }
  return { xs, n, labels };
}
