/**
 * Backend selection. The wasm backend is much faster but ships only
 * inference kernels (no conv backprop), so anything that trains must ask
 * for "cpu"; forward-only consumers default to wasm when available.
 */

import * as tf from "@tensorflow/tfjs";

let initialized: Promise<string> | null = null;

export function initBackend(prefer: "wasm" | "cpu" = "wasm"): Promise<string> {
  if (!initialized) {
    initialized = (async () => {
      if (prefer === "wasm") {
        try {
          require("@tensorflow/tfjs-backend-wasm");
          if (await tf.setBackend("wasm")) {
            await tf.ready();
            return "wasm";
          }
        } catch {
          // fall through to cpu
        }
      }
      await tf.setBackend("cpu");
      await tf.ready();
      return "cpu";
    })();
  }
  return initialized;
}
