/**
 * Candidate-set prompt generation with an on-disk cache.
 *
 * Per candidate set, one short description is produced for each candidate
 * class. To keep row order aligned with the candidate class order, classes
 * are asked one at a time (the "difference" style is the exception: a
 * single comparative question per set whose answer is split into per-class
 * lines). Responses are cached as plain text next to a metadata record, so
 * regeneration is free and auditable; cache writes are atomic.
 */

import { createHash } from 'node:crypto';
import { mkdirSync, readFileSync, renameSync, writeFileSync, existsSync } from 'node:fs';
import { join } from 'node:path';

import type { PromptStyle } from './formats.js';

export const MAX_PROMPT_TOKENS = 40;
export const TOKENIZER = 'whitespace';

export const QUESTION_TEMPLATES: Record<PromptStyle, string> = {
  visual_only: "Describe the visual characteristics of {cls}'s rendering view.",
  functional_only: "Describe the functional features of {cls}'s rendering view.",
  fused:
    "Describe the visual characteristics of {cls}'s rendering view, then its functional features.",
  difference:
    'What is the difference between {classes} in visual characteristics and functional features? Answer with one line per class, in the given order.',
  visual_and_functional:
    "Describe the visual characteristics and functional features of {cls}'s rendering view.",
};

export interface LlmClient {
  readonly id: string;
  complete(prompt: string): Promise<string>;
}

/** Deterministic stand-in for tests and offline smoke runs. */
export class MockLlm implements LlmClient {
  readonly id = 'mock-llm';
  calls = 0;

  async complete(prompt: string): Promise<string> {
    this.calls++;
    const diff = prompt.match(/difference between (.+) in visual/);
    if (diff) {
      return diff[1]
        .split(/,\s*/)
        .map((cls) => `Unlike its rivals, ${cls.trim()} shows a distinctive outline and purpose.`)
        .join('\n');
    }
    const single = prompt.match(/of (.+)'s rendering view/);
    const cls = single ? single[1] : 'the object';
    return `It has the recognizable structure of ${cls}, built for its typical use.`;
  }
}

/** Chat-completions client for an OpenAI-compatible endpoint; retries with
 * exponential backoff before surfacing the failure. */
export class ApiLlm implements LlmClient {
  readonly id: string;
  private readonly baseUrl: string;
  private readonly apiKey: string;
  private readonly retries: number;

  constructor(model = 'gpt-3.5-turbo', retries = 3) {
    this.id = model;
    this.baseUrl = process.env.LLM_BASE_URL ?? 'https://api.openai.com/v1';
    const key = process.env.LLM_API_KEY ?? process.env.OPENAI_API_KEY;
    if (!key) throw new Error('LLM_API_KEY (or OPENAI_API_KEY) is not set');
    this.apiKey = key;
    this.retries = retries;
  }

  async complete(prompt: string): Promise<string> {
    let lastError: Error | null = null;
    for (let attempt = 0; attempt <= this.retries; attempt++) {
      if (attempt > 0) {
        await new Promise((r) => setTimeout(r, 500 * 2 ** (attempt - 1)));
      }
      try {
        const res = await fetch(`${this.baseUrl}/chat/completions`, {
          method: 'POST',
          headers: {
            'content-type': 'application/json',
            authorization: `Bearer ${this.apiKey}`,
          },
          body: JSON.stringify({
            model: this.id,
            messages: [{ role: 'user', content: prompt }],
            temperature: 0,
          }),
        });
        if (!res.ok) throw new Error(`LLM API returned ${res.status}`);
        const doc: any = await res.json();
        return String(doc.choices[0].message.content).trim();
      } catch (err) {
        lastError = err as Error;
      }
    }
    throw new Error(`LLM request failed after ${this.retries + 1} attempts: ${lastError}`);
  }
}

export function truncateTokens(text: string, limit = MAX_PROMPT_TOKENS): string {
  const tokens = text.trim().split(/\s+/).filter(Boolean);
  return tokens.slice(0, limit).join(' ');
}

function questionsFor(classes: string[], style: PromptStyle): string[] {
  const template = QUESTION_TEMPLATES[style];
  if (style === 'difference') {
    return [template.replace('{classes}', classes.join(', '))];
  }
  return classes.map((cls) => template.replace(/\{cls\}/g, cls));
}

export interface GeneratedPrompts {
  key: string;
  classes: string[];
  style: PromptStyle;
  texts: string[];
  fromCache: boolean;
}

function cachePaths(dir: string, key: string, style: PromptStyle) {
  const template = QUESTION_TEMPLATES[style];
  const digest = createHash('sha256')
    .update(JSON.stringify([key, template, style]))
    .digest('hex')
    .slice(0, 24);
  return {
    text: join(dir, `${digest}.txt`),
    meta: join(dir, `${digest}.meta.json`),
  };
}

function atomicWrite(path: string, content: string): void {
  const tmp = `${path}.tmp-${process.pid}`;
  writeFileSync(tmp, content);
  renameSync(tmp, path);
}

/**
 * Produce one prompt text per candidate class (candidate-class order),
 * each capped at MAX_PROMPT_TOKENS whitespace tokens, going through the
 * cache directory first.
 */
export async function generatePromptTexts(
  key: string,
  classes: string[],
  style: PromptStyle,
  llm: LlmClient,
  cacheDir: string
): Promise<GeneratedPrompts> {
  mkdirSync(cacheDir, { recursive: true });
  const paths = cachePaths(cacheDir, key, style);
  if (existsSync(paths.text)) {
    const texts = readFileSync(paths.text, 'utf-8').split('\n').filter(Boolean);
    if (texts.length !== classes.length) {
      throw new Error(
        `corrupt cache entry ${paths.text}: ${texts.length} texts for ${classes.length} classes`
      );
    }
    return { key, classes, style, texts, fromCache: true };
  }

  const questions = questionsFor(classes, style);
  let texts: string[];
  if (style === 'difference') {
    const answer = await llm.complete(questions[0]);
    const lines = answer
      .split('\n')
      .map((l) => l.replace(/^\s*\d+[.)]\s*/, '').trim())
      .filter(Boolean);
    if (lines.length !== classes.length) {
      throw new Error(
        `difference answer for ${key} has ${lines.length} lines, expected ${classes.length}`
      );
    }
    texts = lines;
  } else {
    texts = [];
    for (const question of questions) {
      texts.push((await llm.complete(question)).replace(/\n+/g, ' ').trim());
    }
  }
  texts = texts.map((t) => truncateTokens(t));

  atomicWrite(paths.text, texts.join('\n') + '\n');
  atomicWrite(
    paths.meta,
    JSON.stringify(
      {
        key,
        classes,
        style,
        template: QUESTION_TEMPLATES[style],
        model: llm.id,
        tokenizer: TOKENIZER,
        max_tokens: MAX_PROMPT_TOKENS,
        created: new Date().toISOString(),
      },
      null,
      2
    ) + '\n'
  );
  return { key, classes, style, texts, fromCache: false };
}
