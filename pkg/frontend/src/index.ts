export { TopomolClient, TopomolApiError } from './client.js';
export type * from './types.js';
