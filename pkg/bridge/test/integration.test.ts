/**
 * Cross-language integration: everything the bridge emits must pass the
 * engine's `validate` subcommand, and the full two-phase refinement loop
 * (classify -> prompts-missing -> gen-layer2 -> re-evaluate) must close.
 */

import { execFileSync } from 'node:child_process';
import { mkdirSync, mkdtempSync, readFileSync, writeFileSync } from 'node:fs';
import { tmpdir } from 'node:os';
import { join } from 'node:path';

import { describe, expect, it } from 'vitest';

import { exportLayer1Bank } from '../src/bank.js';
import { MockEncoder } from '../src/encoder.js';
import { exportViewEmbeddings } from '../src/exportViews.js';
import { generateLayer2, readKeysFile } from '../src/genLayer2.js';
import { MockLlm } from '../src/llm.js';

const CLASSES = ['bathtub', 'bed', 'chair', 'desk', 'monitor'];

function engine(...args: string[]): { code: number; out: string } {
  try {
    const out = execFileSync('mvzero', args, { encoding: 'utf-8', stdio: 'pipe' });
    return { code: 0, out };
  } catch (err: any) {
    return { code: err.status ?? -1, out: `${err.stdout ?? ''}${err.stderr ?? ''}` };
  }
}

async function exportSmokeSet(root: string) {
  const images = join(root, 'images');
  const labels: Record<string, string> = {};
  CLASSES.forEach((cls, i) => {
    const shapeId = `${cls}_0001`;
    mkdirSync(join(images, shapeId), { recursive: true });
    for (let v = 0; v < 4; v++) {
      writeFileSync(join(images, shapeId, `${v}.png`), `pixels of ${cls} view ${v}`);
    }
    labels[shapeId] = cls;
  });
  const out = join(root, 'export');
  const encoder = new MockEncoder(48);
  const result = await exportViewEmbeddings({
    imagesDir: images,
    outDir: out,
    encoder,
    classes: CLASSES,
    datasetName: 'bridge-smoke',
    viewConfig: 'circular',
    labels,
  });
  const bankPath = await exportLayer1Bank(CLASSES, encoder, join(out, 'bank.json'));
  return { ...result, bankPath, outDir: out };
}

describe('bridge output passes the engine validator', () => {
  it('5-shape smoke set: manifest and bank validate with zero findings', async () => {
    const root = mkdtempSync(join(tmpdir(), 'smoke-'));
    const smoke = await exportSmokeSet(root);
    const result = engine(
      'validate', '--manifest', smoke.manifestPath, '--bank', smoke.bankPath
    );
    expect(result.out).toContain('OK');
    expect(result.out).toContain('0 findings');
    expect(result.code).toBe(0);
  });

  it('bank versions with layer-2 entries also validate cleanly', async () => {
    const root = mkdtempSync(join(tmpdir(), 'smoke-'));
    const smoke = await exportSmokeSet(root);
    const gen = await generateLayer2(
      smoke.bankPath,
      ['bathtub|bed|chair', 'chair|desk|monitor'],
      new MockEncoder(48),
      new MockLlm(),
      join(root, 'cache'),
      'visual_and_functional'
    );
    const result = engine('validate', '--bank', gen.bankPath);
    expect(result.out).toContain('0 findings');
    expect(result.code).toBe(0);
  });
});

describe('two-phase refinement loop', () => {
  it('prompts-missing keys feed gen-layer2 until --strict passes', async () => {
    const root = mkdtempSync(join(tmpdir(), 'loop-'));
    const smoke = await exportSmokeSet(root);

    // mock embeddings are unstructured, so force refinement everywhere
    const flags = ['--delta', '1.0', '--top-k', '3', '--m-select', '2'];

    const keysPath = join(root, 'keys.txt');
    let result = engine(
      'prompts-missing', '--manifest', smoke.manifestPath, '--bank', smoke.bankPath,
      ...flags, '--out', keysPath
    );
    expect(result.code).toBe(0);
    const keys = readKeysFile(keysPath);
    expect(keys.length).toBeGreaterThan(0);

    // strict evaluation fails while entries are missing
    result = engine(
      'eval', '--manifest', smoke.manifestPath, '--bank', smoke.bankPath,
      ...flags, '--strict', '--no-fig', '--out', join(root, 'before.json')
    );
    expect(result.code).toBe(3);

    const gen = await generateLayer2(
      smoke.bankPath, keys, new MockEncoder(48), new MockLlm(),
      join(root, 'cache'), 'visual_and_functional'
    );
    expect(gen.added).toBe(keys.length);

    result = engine(
      'eval', '--manifest', smoke.manifestPath, '--bank', gen.bankPath,
      ...flags, '--strict', '--no-fig', '--out', join(root, 'after.json')
    );
    expect(result.code).toBe(0);
    const report = JSON.parse(readFileSync(join(root, 'after.json'), 'utf-8'));
    expect(report.deferred_count).toBe(0);
    expect(report.refined_count).toBe(CLASSES.length);

    // nothing left to generate
    result = engine(
      'prompts-missing', '--manifest', smoke.manifestPath, '--bank', gen.bankPath,
      ...flags, '--out', join(root, 'keys2.txt')
    );
    expect(result.code).toBe(0);
    expect(readFileSync(join(root, 'keys2.txt'), 'utf-8')).toBe('');
  });
});
