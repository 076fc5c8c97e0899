/**
 * Prompt bank emission: the layer-1 class prompts and the appended
 * layer-2 candidate-set entries. Banks are never rewritten in place; every
 * update produces a new content-addressed bank version.
 */

import { createHash } from 'node:crypto';
import { mkdirSync, readFileSync, writeFileSync } from 'node:fs';
import { basename, dirname, join } from 'node:path';

import { Emb1Matrix, matrixFromRows, readEmb1File, writeEmb1File } from './emb1.js';
import type { Encoder } from './encoder.js';
import { BankHeader, Layer2EntryHeader, PromptStyle, stringifyPretty } from './formats.js';
import { GeneratedPrompts } from './llm.js';

export const DEFAULT_LAYER1_TEMPLATE =
  'A synthetic 3D model view of {} with different angles.';

export interface LoadedBank {
  header: BankHeader;
  layer1: Emb1Matrix;
  layer2: Emb1Matrix;
}

export function loadBank(path: string): LoadedBank {
  const header = JSON.parse(readFileSync(path, 'utf-8')) as BankHeader;
  const dir = dirname(path);
  return {
    header,
    layer1: readEmb1File(join(dir, header.layer1_file)),
    layer2: readEmb1File(join(dir, header.layer2_file)),
  };
}

function writeBankFiles(dir: string, stem: string, header: BankHeader,
                        layer1: Emb1Matrix, layer2: Emb1Matrix): string {
  header.layer1_file = `${stem}_layer1.emb1`;
  header.layer2_file = `${stem}_layer2.emb1`;
  writeEmb1File(join(dir, header.layer1_file), layer1);
  writeEmb1File(join(dir, header.layer2_file), layer2);
  const path = join(dir, `${stem}.json`);
  writeFileSync(path, stringifyPretty(header));
  return path;
}

export async function exportLayer1Bank(
  classes: string[],
  encoder: Encoder,
  outPath: string,
  template = DEFAULT_LAYER1_TEMPLATE
): Promise<string> {
  if (classes.length === 0) throw new Error('class list is empty');
  const seen = new Set<string>();
  for (const cls of classes) {
    if (seen.has(cls)) throw new Error(`duplicate class ${JSON.stringify(cls)}`);
    seen.add(cls);
  }
  if (!template.includes('{}')) {
    throw new Error('layer-1 template must contain exactly one {} placeholder');
  }
  const rows: Float32Array[] = [];
  for (const cls of classes) {
    rows.push(await encoder.encodeText(template.replace('{}', cls)));
  }
  const layer1 = matrixFromRows(rows);
  const header: BankHeader = {
    classes,
    dim: layer1.cols,
    layer1_template: template,
    layer1_file: '',
    layer2_file: '',
    layer2_entries: [],
  };
  const dir = dirname(outPath);
  mkdirSync(dir, { recursive: true });
  const stem = basename(outPath).replace(/\.json$/, '');
  return writeBankFiles(dir, stem, header, layer1, matrixFromRows([], layer1.cols));
}

/**
 * Append newly generated candidate-set prompts to a bank, emitting a new
 * content-addressed bank version next to the old one. Row order within an
 * entry always matches the candidate class order.
 */
export async function appendLayer2Entries(
  bankPath: string,
  generated: GeneratedPrompts[],
  encoder: Encoder,
  style: PromptStyle
): Promise<{ path: string; added: number }> {
  const bank = loadBank(bankPath);
  const existing = new Set(bank.header.layer2_entries.map((e) => e.key));

  const newRows: Float32Array[] = [];
  const newEntries: Layer2EntryHeader[] = [];
  let rowCursor = bank.layer2.rows;
  for (const item of generated) {
    if (existing.has(item.key)) continue;
    if (item.texts.length !== item.classes.length) {
      throw new Error(
        `${item.key}: ${item.texts.length} texts for ${item.classes.length} classes`
      );
    }
    const rows: Float32Array[] = [];
    for (const text of item.texts) {
      const row = await encoder.encodeText(text);
      if (row.length !== bank.header.dim) {
        throw new Error(
          `encoder dim ${row.length} != bank dim ${bank.header.dim} for ${item.key}`
        );
      }
      rows.push(row);
    }
    newEntries.push({
      key: item.key,
      classes: item.classes,
      row_start: rowCursor,
      row_count: rows.length,
      prompt_texts: item.texts,
      prompt_style: style,
    });
    rowCursor += rows.length;
    newRows.push(...rows);
  }

  const mergedData = new Float32Array(bank.layer2.data.length + newRows.length * bank.header.dim);
  mergedData.set(bank.layer2.data, 0);
  newRows.forEach((row, i) => {
    mergedData.set(row, bank.layer2.data.length + i * bank.header.dim);
  });
  const layer2: Emb1Matrix = {
    rows: rowCursor,
    cols: bank.header.dim,
    data: mergedData,
  };
  const header: BankHeader = {
    ...bank.header,
    layer2_entries: [...bank.header.layer2_entries, ...newEntries],
  };

  // content-addressed version stem from the entry table and both payloads
  const digest = createHash('sha256')
    .update(JSON.stringify(header.layer2_entries))
    .update(Buffer.from(bank.layer1.data.buffer, 0, bank.layer1.data.byteLength))
    .update(Buffer.from(layer2.data.buffer, 0, layer2.data.byteLength))
    .digest('hex')
    .slice(0, 12);
  const dir = dirname(bankPath);
  const baseStem = basename(bankPath)
    .replace(/\.json$/, '')
    .replace(/-[0-9a-f]{12}$/, '');
  const path = writeBankFiles(dir, `${baseStem}-${digest}`, header, bank.layer1, layer2);
  return { path, added: newEntries.length };
}
