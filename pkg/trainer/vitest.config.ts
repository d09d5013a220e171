import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["tests/**/*.test.ts"],
    globalSetup: "./tests/global_setup.ts",
    // convolution-heavy tests run minutes on a single CPU
    testTimeout: 600_000,
    hookTimeout: 600_000,
    fileParallelism: false,
  },
});
