import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    // every test spawns at least one Python subprocess
    testTimeout: 30000,
    hookTimeout: 30000,
  },
});
