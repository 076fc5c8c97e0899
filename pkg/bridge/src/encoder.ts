/**
 * Encoders turn images and texts into embedding rows.
 *
 * Two implementations: a contrastive vision-language checkpoint loaded via
 * transformers (the real path; needs the checkpoint available locally or
 * downloadable), and a deterministic mock that hashes its input into a
 * fixed-dimension vector (for tests, smoke sets, and offline plumbing
 * work). Rows are emitted unnormalized; the engine normalizes at load.
 */

import { createHash } from 'node:crypto';

export interface Encoder {
  readonly id: string;
  readonly dim: number;
  encodeImage(bytes: Buffer): Promise<Float32Array>;
  encodeText(text: string): Promise<Float32Array>;
}

/** Deterministic embedding from a SHA-256 hash chain; same input, same
 * vector, no model needed. */
export class MockEncoder implements Encoder {
  readonly id: string;
  readonly dim: number;

  constructor(dim = 64) {
    this.dim = dim;
    this.id = `mock-${dim}`;
  }

  private vectorFor(kind: string, payload: Buffer): Float32Array {
    const out = new Float32Array(this.dim);
    let counter = 0;
    let block = Buffer.alloc(0);
    let offset = 0;
    for (let i = 0; i < this.dim; i++) {
      if (offset + 4 > block.length) {
        block = createHash('sha256')
          .update(kind)
          .update(payload)
          .update(String(counter++))
          .digest();
        offset = 0;
      }
      const u = block.readUInt32LE(offset);
      offset += 4;
      out[i] = (u / 0xffffffff) * 2 - 1; // uniform in [-1, 1]
    }
    return out;
  }

  async encodeImage(bytes: Buffer): Promise<Float32Array> {
    return this.vectorFor('image', bytes);
  }

  async encodeText(text: string): Promise<Float32Array> {
    return this.vectorFor('text', Buffer.from(text, 'utf-8'));
  }
}

/** Contrastive checkpoint via transformers; lazy-loaded so the bridge works
 * without the dependency unless this encoder is requested. */
export class ClipEncoder implements Encoder {
  readonly id: string;
  dim = 0;
  private ready: Promise<void> | null = null;
  private lib: any = null;
  private tokenizer: any = null;
  private textModel: any = null;
  private processor: any = null;
  private visionModel: any = null;

  constructor(checkpoint = 'Xenova/clip-vit-base-patch16') {
    this.id = checkpoint;
  }

  private load(): Promise<void> {
    if (!this.ready) {
      this.ready = (async () => {
        let lib: any;
        // computed specifier: the dependency is optional and untyped here
        const moduleName = '@huggingface/transformers';
        try {
          lib = await import(moduleName);
        } catch (err) {
          throw new Error(
            `encoder ${this.id} needs the optional ${moduleName} ` +
              `dependency: ${(err as Error).message}`
          );
        }
        this.lib = lib;
        this.tokenizer = await lib.AutoTokenizer.from_pretrained(this.id);
        this.textModel = await lib.CLIPTextModelWithProjection.from_pretrained(this.id);
        this.processor = await lib.AutoProcessor.from_pretrained(this.id);
        this.visionModel = await lib.CLIPVisionModelWithProjection.from_pretrained(this.id);
      })();
    }
    return this.ready;
  }

  async encodeText(text: string): Promise<Float32Array> {
    await this.load();
    const inputs = this.tokenizer([text], { padding: true, truncation: true });
    const { text_embeds } = await this.textModel(inputs);
    const row = Float32Array.from(text_embeds.data as Iterable<number>);
    this.dim = row.length;
    return row;
  }

  async encodeImage(bytes: Buffer): Promise<Float32Array> {
    await this.load();
    const blob = new Blob([Uint8Array.from(bytes)]);
    const image = await this.lib.RawImage.fromBlob(blob);
    const inputs = await this.processor(image);
    const { image_embeds } = await this.visionModel(inputs);
    const row = Float32Array.from(image_embeds.data as Iterable<number>);
    this.dim = row.length;
    return row;
  }
}

export function createEncoder(spec: string): Encoder {
  if (spec === 'mock' || spec.startsWith('mock-')) {
    const dim = spec === 'mock' ? 64 : Number(spec.slice('mock-'.length));
    if (!Number.isInteger(dim) || dim < 1) {
      throw new Error(`bad mock encoder spec ${JSON.stringify(spec)}`);
    }
    return new MockEncoder(dim);
  }
  return new ClipEncoder(spec);
}
