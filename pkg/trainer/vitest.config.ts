import { defineConfig } from "vitest/config";

// single CPU box: no point running files in parallel, and the training
// tests legitimately take minutes
export default defineConfig({
  test: {
    fileParallelism: false,
    pool: "forks",
    testTimeout: 1_800_000,
    hookTimeout: 1_800_000,
  },
});
