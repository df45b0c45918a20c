export { encodeNpy, decodeNpy, NpyArray } from './npy.js';
export { BundleManifest, OodEntry, OodGroup, buildManifest, manifestJson } from './manifest.js';
export { ClassifierHead, FeatureExtractor, splitModel, embed } from './model.js';
export { Dataset, OodDataset, ExportJob, exportBundle } from './export.js';
export { loadModelFromDisk, saveModelToDisk, loadDatasetJson } from './io.js';
