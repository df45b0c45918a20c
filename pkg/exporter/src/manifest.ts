/** Bundle manifest schema shared with the Python evaluation package. */

export type OodGroup = 'near' | 'far';

export interface OodEntry {
  name: string;
  features: string;
  group: OodGroup;
}

export interface BundleManifest {
  version: 1;
  feature_dim: number;
  num_classes: number;
  id_train: { features: string; labels: string };
  id_test: { features: string };
  ood: OodEntry[];
  head: { weights: string; bias: string };
}

export function buildManifest(featureDim: number, numClasses: number, ood: OodEntry[]): BundleManifest {
  return {
    version: 1,
    feature_dim: featureDim,
    num_classes: numClasses,
    id_train: { features: 'id_train_features.npy', labels: 'id_train_labels.npy' },
    id_test: { features: 'id_test_features.npy' },
    ood,
    head: { weights: 'head_weights.npy', bias: 'head_bias.npy' },
  };
}

/** Stable serialization: sorted keys, trailing newline, matching the Python writer. */
export function manifestJson(manifest: BundleManifest): string {
  const sortKeys = (value: unknown): unknown => {
    if (Array.isArray(value)) return value.map(sortKeys);
    if (value !== null && typeof value === 'object') {
      const entries = Object.entries(value as Record<string, unknown>).sort(([a], [b]) =>
        a < b ? -1 : a > b ? 1 : 0,
      );
      return Object.fromEntries(entries.map(([k, v]) => [k, sortKeys(v)]));
    }
    return value;
  };
  return JSON.stringify(sortKeys(manifest), null, 2) + '\n';
}
