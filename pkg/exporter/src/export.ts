/**
 * Bundle export: run every split through the embedding submodel and write the
 * NPY + manifest layout the evaluation package consumes.
 *
 * All validation happens before the first byte is written, so a failed export
 * never leaves a half-bundle behind.
 */

import * as fs from 'node:fs';
import * as path from 'node:path';
import * as tf from '@tensorflow/tfjs';

import { buildManifest, manifestJson, OodEntry, OodGroup } from './manifest.js';
import { embed, splitModel } from './model.js';
import { encodeNpy } from './npy.js';

export interface Dataset {
  /** Row-major N-by-inputDim matrix. */
  xs: Float32Array;
  n: number;
  /** Integer class labels, required for the ID training split. */
  labels?: Int32Array;
}

export interface OodDataset extends Dataset {
  name: string;
  group: OodGroup;
}

export interface ExportJob {
  model: tf.LayersModel;
  idTrain: Dataset;
  idTest: Dataset;
  oodSets: OodDataset[];
  outDir: string;
  batchSize?: number;
  featureLayer?: string;
}

function checkLabels(labels: Int32Array, n: number, numClasses: number): void {
  if (labels.length !== n) {
    throw new Error(`expected ${n} labels, got ${labels.length}`);
  }
  for (let i = 0; i < labels.length; i++) {
    if (labels[i] < 0 || labels[i] >= numClasses) {
      throw new Error(`label ${labels[i]} at row ${i} outside [0, ${numClasses})`);
    }
  }
}

export function exportBundle(job: ExportJob): string {
  const batchSize = job.batchSize ?? 256;
  if (batchSize < 1) {
    throw new Error(`batchSize ${batchSize} must be >= 1`);
  }
  if (job.idTrain.labels === undefined) {
    throw new Error('id_train must carry labels');
  }
  const extractor = splitModel(job.model, job.featureLayer);
  const { featureDim, numClasses } = extractor.head;
  checkLabels(job.idTrain.labels, job.idTrain.n, numClasses);
  const seen = new Set<string>();
  for (const ood of job.oodSets) {
    if (seen.has(ood.name)) {
      throw new Error(`duplicate ood set name '${ood.name}'`);
    }
    seen.add(ood.name);
  }

  const files = new Map<string, Buffer>();
  const emb = (ds: Dataset) => embed(extractor, ds.xs, ds.n, batchSize);
  files.set('id_train_features.npy', encodeNpy(emb(job.idTrain), [job.idTrain.n, featureDim]));
  files.set(
    'id_train_labels.npy',
    encodeNpy(Float32Array.from(job.idTrain.labels), [job.idTrain.n]),
  );
  files.set('id_test_features.npy', encodeNpy(emb(job.idTest), [job.idTest.n, featureDim]));
  files.set('head_weights.npy', encodeNpy(extractor.head.weights, [featureDim, numClasses]));
  files.set('head_bias.npy', encodeNpy(extractor.head.bias, [numClasses]));

  const oodEntries: OodEntry[] = [];
  for (const ood of job.oodSets) {
    const fname = `ood_${ood.name}.npy`;
    files.set(fname, encodeNpy(emb(ood), [ood.n, featureDim]));
    oodEntries.push({ name: ood.name, features: fname, group: ood.group });
  }

  fs.mkdirSync(job.outDir, { recursive: true });
  for (const [fname, buf] of files) {
    fs.writeFileSync(path.join(job.outDir, fname), buf);
  }
  const manifestPath = path.join(job.outDir, 'manifest.json');
  fs.writeFileSync(manifestPath, manifestJson(buildManifest(featureDim, numClasses, oodEntries)));
  return manifestPath;
}
