import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["tests/**/*.spec.ts"],
    // e2e tests drive a live server subprocess
    testTimeout: 30_000,
    hookTimeout: 60_000,
  },
});
