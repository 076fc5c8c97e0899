export * from './emb1.js';
export * from './formats.js';
export * from './encoder.js';
export * from './llm.js';
export * from './bank.js';
export * from './exportViews.js';
export * from './genLayer2.js';
