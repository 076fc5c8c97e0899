/**
 * Export view embeddings: walk an image tree laid out as
 * <root>/<shape_id>/<view files>, encode every view, and emit the EMB1
 * matrix plus the dataset manifest (rows in view order, unnormalized).
 * A sidecar export_meta.json records the checkpoint and preprocessing
 * provenance, which the manifest schema itself does not carry.
 */

import {
  existsSync,
  mkdirSync,
  readFileSync,
  readdirSync,
  rmSync,
  statSync,
  writeFileSync,
} from 'node:fs';
import { join } from 'node:path';

import { matrixFromRows, writeEmb1File } from './emb1.js';
import type { Encoder } from './encoder.js';
import { Manifest, ShapeEntry, ViewConfig, stringifyPretty } from './formats.js';

export interface ExportViewsOptions {
  imagesDir: string;
  outDir: string;
  encoder: Encoder;
  classes: string[];
  datasetName: string;
  viewConfig: ViewConfig;
  /** optional shape_id -> class name */
  labels?: Record<string, string>;
}

/** view files sort by numeric stem when possible, else lexicographically */
function viewOrder(a: string, b: string): number {
  const na = Number.parseInt(a, 10);
  const nb = Number.parseInt(b, 10);
  if (Number.isFinite(na) && Number.isFinite(nb) && na !== nb) return na - nb;
  return a < b ? -1 : a > b ? 1 : 0;
}

export async function exportViewEmbeddings(
  options: ExportViewsOptions
): Promise<{ manifestPath: string; embeddingPath: string; shapes: number; views: number }> {
  const { imagesDir, outDir, encoder } = options;
  const shapeIds = readdirSync(imagesDir)
    .filter((name) => statSync(join(imagesDir, name)).isDirectory())
    .sort();
  if (shapeIds.length === 0) {
    throw new Error(`no shape directories under ${imagesDir}`);
  }

  mkdirSync(outDir, { recursive: true });
  const embeddingPath = join(outDir, 'views.emb1');
  const manifestPath = join(outDir, 'manifest.json');
  const metaPath = join(outDir, 'export_meta.json');

  const rows: Float32Array[] = [];
  const shapes: ShapeEntry[] = [];
  try {
    for (const shapeId of shapeIds) {
      const shapeDir = join(imagesDir, shapeId);
      const files = readdirSync(shapeDir).sort(viewOrder);
      if (files.length === 0) throw new Error(`shape ${shapeId} has no view images`);
      const viewRows: number[] = [];
      for (const file of files) {
        const path = join(shapeDir, file);
        let bytes: Buffer;
        try {
          bytes = readFileSync(path);
        } catch (err) {
          throw new Error(`unreadable view image ${path}: ${(err as Error).message}`);
        }
        let row: Float32Array;
        try {
          row = await encoder.encodeImage(bytes);
        } catch (err) {
          throw new Error(`failed to encode ${path}: ${(err as Error).message}`);
        }
        if (rows.length > 0 && row.length !== rows[0].length) {
          throw new Error(
            `dimension mismatch at ${path}: ${row.length} != ${rows[0].length}`
          );
        }
        viewRows.push(rows.length);
        rows.push(row);
      }
      const entry: ShapeEntry = {
        shape_id: shapeId,
        view_rows: viewRows,
        view_config: options.viewConfig,
      };
      const label = options.labels?.[shapeId];
      if (label !== undefined) {
        if (!options.classes.includes(label)) {
          throw new Error(`shape ${shapeId} labelled ${label}, not in class list`);
        }
        entry.label = label;
      }
      shapes.push(entry);
    }

    const dim = rows[0].length;
    writeEmb1File(embeddingPath, matrixFromRows(rows));
    const manifest: Manifest = {
      dataset_name: options.datasetName,
      classes: options.classes,
      dim,
      embedding_file: 'views.emb1',
      shapes,
    };
    writeFileSync(manifestPath, stringifyPretty(manifest));
    writeFileSync(
      metaPath,
      stringifyPretty({
        encoder: encoder.id,
        preprocessing: 'checkpoint default',
        view_config: options.viewConfig,
        exported: new Date().toISOString(),
      })
    );
  } catch (err) {
    // never leave partial exports behind
    for (const path of [embeddingPath, manifestPath, metaPath]) {
      if (existsSync(path)) rmSync(path);
    }
    throw err;
  }
  return { manifestPath, embeddingPath, shapes: shapes.length, views: rows.length };
}
