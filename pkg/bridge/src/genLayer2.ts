/**
 * Second-layer prompt generation for the keys the engine reported missing:
 * generate one description per candidate class (cache first), encode them,
 * and emit a new bank version containing the appended entries.
 */

import { readFileSync } from 'node:fs';

import { appendLayer2Entries, loadBank } from './bank.js';
import type { Encoder } from './encoder.js';
import { PromptStyle, candidateKey } from './formats.js';
import { GeneratedPrompts, LlmClient, generatePromptTexts } from './llm.js';

export interface GenLayer2Result {
  bankPath: string;
  requested: number;
  added: number;
  cacheHits: number;
}

export function readKeysFile(path: string): string[] {
  return readFileSync(path, 'utf-8')
    .split('\n')
    .map((line) => line.trim())
    .filter(Boolean);
}

export async function generateLayer2(
  bankPath: string,
  keys: string[],
  encoder: Encoder,
  llm: LlmClient,
  cacheDir: string,
  style: PromptStyle
): Promise<GenLayer2Result> {
  const bank = loadBank(bankPath);
  const generated: GeneratedPrompts[] = [];
  let cacheHits = 0;
  for (const rawKey of keys) {
    const classes = rawKey.split('|');
    // normalize to the bank's class order; rejects unknown classes
    const key = candidateKey(classes, bank.header.classes);
    const ordered = key.split('|');
    const item = await generatePromptTexts(key, ordered, style, llm, cacheDir);
    cacheHits += item.fromCache ? 1 : 0;
    generated.push(item);
  }
  const { path, added } = await appendLayer2Entries(bankPath, generated, encoder, style);
  return { bankPath: path, requested: keys.length, added, cacheHits };
}
