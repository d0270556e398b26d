import { defineConfig } from 'vitest/config';

// The e2e suites spawn a real backend process; give them room to boot it.
export default defineConfig({
  test: {
    environment: 'node',
    include: ['tests/**/*.test.ts'],
    testTimeout: 120_000,
    hookTimeout: 120_000,
  },
});
