/**
 * JSON schemas shared with the recognition engine: dataset manifests and
 * prompt banks. The bridge only ever emits these; the engine validates.
 */

export type ViewConfig = 'circular' | 'spherical' | 'random' | 'other';

export interface ShapeEntry {
  shape_id: string;
  label?: string;
  view_rows: number[];
  view_config: ViewConfig;
}

export interface Manifest {
  dataset_name: string;
  classes: string[];
  dim: number;
  embedding_file: string;
  shapes: ShapeEntry[];
}

export type PromptStyle =
  | 'visual_only'
  | 'functional_only'
  | 'fused'
  | 'difference'
  | 'visual_and_functional';

export interface Layer2EntryHeader {
  key: string;
  classes: string[];
  row_start: number;
  row_count: number;
  prompt_texts: string[];
  prompt_style: PromptStyle;
}

export interface BankHeader {
  classes: string[];
  dim: number;
  layer1_template: string;
  layer1_file: string;
  layer2_file: string;
  layer2_entries: Layer2EntryHeader[];
}

/** Candidate key: class names sorted by their index in the bank's class
 * list, joined with "|"; insensitive to input order. */
export function candidateKey(classes: string[], allClasses: string[]): string {
  const index = new Map(allClasses.map((c, i) => [c, i]));
  const ids = classes.map((c) => {
    const i = index.get(c);
    if (i === undefined) throw new Error(`unknown class ${JSON.stringify(c)}`);
    return i;
  });
  if (ids.length < 2) throw new Error('a candidate set needs at least 2 classes');
  return [...ids].sort((a, b) => a - b).map((i) => allClasses[i]).join('|');
}

export function stringifyPretty(doc: unknown): string {
  return JSON.stringify(doc, null, 2) + '\n';
}
