#!/usr/bin/env node
/**
 * Bridge CLI: export-views, export-layer1, gen-layer2.
 *
 * The bridge is the only component that touches networks (checkpoints,
 * LLM APIs); everything it emits is a plain file the recognition engine
 * validates and consumes offline.
 */

import { readFileSync } from 'node:fs';

import yargs from 'yargs';
import { hideBin } from 'yargs/helpers';

import { exportLayer1Bank, DEFAULT_LAYER1_TEMPLATE } from './bank.js';
import { createEncoder } from './encoder.js';
import { exportViewEmbeddings } from './exportViews.js';
import type { PromptStyle, ViewConfig } from './formats.js';
import { generateLayer2, readKeysFile } from './genLayer2.js';
import { ApiLlm, LlmClient, MockLlm } from './llm.js';

function readClasses(path: string): string[] {
  return readFileSync(path, 'utf-8')
    .split('\n')
    .map((line) => line.trim())
    .filter(Boolean);
}

function makeLlm(spec: string): LlmClient {
  if (spec === 'mock') return new MockLlm();
  return new ApiLlm(spec);
}

const STYLES: PromptStyle[] = [
  'visual_only',
  'functional_only',
  'fused',
  'difference',
  'visual_and_functional',
];

async function main(): Promise<void> {
  await yargs(hideBin(process.argv))
    .scriptName('mvzero-bridge')
    .command(
      'export-views',
      'encode an image tree (shape_id/view.png) into views.emb1 + manifest.json',
      (y) =>
        y
          .option('images', { type: 'string', demandOption: true, describe: 'image tree root' })
          .option('classes', { type: 'string', demandOption: true, describe: 'class list file, one per line' })
          .option('labels', { type: 'string', describe: 'optional JSON map shape_id -> class' })
          .option('out-dir', { type: 'string', demandOption: true })
          .option('dataset-name', { type: 'string', default: 'bridge-export' })
          .option('view-config', {
            type: 'string',
            default: 'circular',
            choices: ['circular', 'spherical', 'random', 'other'],
          })
          .option('encoder', {
            type: 'string',
            default: 'mock-64',
            describe: "checkpoint id, or 'mock-<dim>' for the deterministic test encoder",
          }),
      async (argv) => {
        const labels = argv.labels
          ? (JSON.parse(readFileSync(argv.labels, 'utf-8')) as Record<string, string>)
          : undefined;
        const result = await exportViewEmbeddings({
          imagesDir: argv.images,
          outDir: argv['out-dir'],
          encoder: createEncoder(argv.encoder),
          classes: readClasses(argv.classes),
          datasetName: argv['dataset-name'],
          viewConfig: argv['view-config'] as ViewConfig,
          labels,
        });
        console.log(
          `exported ${result.views} views of ${result.shapes} shapes -> ${result.manifestPath}`
        );
      }
    )
    .command(
      'export-layer1',
      'encode the hand-crafted class template into a layer-1 prompt bank',
      (y) =>
        y
          .option('classes', { type: 'string', demandOption: true })
          .option('out', { type: 'string', demandOption: true, describe: 'bank JSON path' })
          .option('template', { type: 'string', default: DEFAULT_LAYER1_TEMPLATE })
          .option('encoder', { type: 'string', default: 'mock-64' }),
      async (argv) => {
        const path = await exportLayer1Bank(
          readClasses(argv.classes),
          createEncoder(argv.encoder),
          argv.out,
          argv.template
        );
        console.log(`wrote layer-1 bank ${path}`);
      }
    )
    .command(
      'gen-layer2',
      'generate + encode candidate-set prompts for the keys the engine reported missing',
      (y) =>
        y
          .option('bank', { type: 'string', demandOption: true })
          .option('keys', { type: 'string', demandOption: true, describe: 'keys file from prompts-missing' })
          .option('cache-dir', { type: 'string', default: '.prompt-cache' })
          .option('style', { type: 'string', default: 'visual_and_functional', choices: STYLES })
          .option('llm', { type: 'string', default: 'mock', describe: "'mock' or a chat model id" })
          .option('encoder', { type: 'string', default: 'mock-64' }),
      async (argv) => {
        const result = await generateLayer2(
          argv.bank,
          readKeysFile(argv.keys),
          createEncoder(argv.encoder),
          makeLlm(argv.llm),
          argv['cache-dir'],
          argv.style as PromptStyle
        );
        console.log(
          `added ${result.added}/${result.requested} entries ` +
            `(${result.cacheHits} cache hits) -> ${result.bankPath}`
        );
      }
    )
    .demandCommand(1)
    .strict()
    .fail((msg, err) => {
      console.error(err ? `error: ${err.message}` : msg);
      process.exit(err ? 2 : 1);
    })
    .parseAsync();
}

main();
