#!/usr/bin/env node
/**
 * CLI: export a model checkpoint plus datasets into an evaluation bundle.
 *
 *   ood-export --model ckpt/model.json --id-train train.json --id-test test.json \
 *       --ood texture:far:texture.json --out bundle/
 *
 * Each --ood argument is name:group:path with group 'near' or 'far'.
 */

import yargs from 'yargs';
import { hideBin } from 'yargs/helpers';

import { exportBundle, OodDataset } from './export.js';
import { loadDatasetJson, loadModelFromDisk } from './io.js';
import { OodGroup } from './manifest.js';

function parseOodArg(arg: string): { name: string; group: OodGroup; file: string } {
  const first = arg.indexOf(':');
  const second = arg.indexOf(':', first + 1);
  if (first < 1 || second < 0) {
    throw new Error(`--ood '${arg}' must be name:group:path`);
  }
  const name = arg.slice(0, first);
  const group = arg.slice(first + 1, second);
  const file = arg.slice(second + 1);
  if (group !== 'near' && group !== 'far') {
    throw new Error(`--ood '${arg}': group '${group}' must be 'near' or 'far'`);
  }
  return { name, group, file };
}

export async function main(argv: string[]): Promise<number> {
  const args = await yargs(argv)
    .option('model', { type: 'string', demandOption: true, describe: 'path to model.json' })
    .option('feature-layer', { type: 'string', describe: 'layer whose output is h(x)' })
    .option('id-train', { type: 'string', demandOption: true })
    .option('id-test', { type: 'string', demandOption: true })
    .option('ood', { type: 'string', array: true, default: [] as string[], describe: 'name:group:path' })
    .option('batch-size', { type: 'number', default: 256 })
    .option('out', { type: 'string', demandOption: true })
    .strict()
    .fail((msg) => {
      throw new Error(msg);
    })
    .parse();

  const model = await loadModelFromDisk(args.model);
  const idTrain = loadDatasetJson(args['id-train']);
  const idTest = loadDatasetJson(args['id-test']);
  const oodSets: OodDataset[] = args.ood.map((spec: string) => {
    const { name, group, file } = parseOodArg(spec);
    return { name, group, ...loadDatasetJson(file) };
  });
  const manifestPath = exportBundle({
    model,
    idTrain,
    idTest,
    oodSets,
    outDir: args.out,
    batchSize: args['batch-size'],
    featureLayer: args['feature-layer'],
  });
  console.log(manifestPath);
  return 0;
}

const invokedDirectly = process.argv[1]?.endsWith('cli.js');
if (invokedDirectly) {
  main(hideBin(process.argv))
    .then((code) => process.exit(code))
    .catch((err: Error) => {
      console.error(`error: ${err.message}`);
      process.exit(1);
    });
}
