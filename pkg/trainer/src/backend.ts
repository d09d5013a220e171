/** tf.js backend selection: WASM when available, plain CPU as fallback. */

import { createRequire } from "node:module";
import path from "node:path";
import * as tf from "@tensorflow/tfjs";
import { setWasmPaths } from "@tensorflow/tfjs-backend-wasm";

let ready: Promise<string> | null = null;

/**
 * Initialize the compute backend once. The WASM backend carries the fast
 * convolution kernels; the pure-JS CPU backend is orders of magnitude
 * slower at this architecture but keeps the package functional.
 */
export function ensureBackend(): Promise<string> {
  if (!ready) {
    ready = (async () => {
      try {
        const require = createRequire(import.meta.url);
        const dist = path.dirname(require.resolve("@tensorflow/tfjs-backend-wasm"));
        setWasmPaths(dist + path.sep);
        const ok = await tf.setBackend("wasm");
        if (!ok) throw new Error("wasm backend rejected");
      } catch (err) {
        console.warn(`wasm backend unavailable (${err}); falling back to cpu`);
        await tf.setBackend("cpu");
      }
      await tf.ready();
      return tf.getBackend();
    })();
  }
  return ready;
}
