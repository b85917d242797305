import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["tests/**/*.test.ts"],
    // equivalence runs spawn the core several times over large clouds
    testTimeout: 120_000,
    hookTimeout: 120_000,
  },
});
