import { execFileSync } from "node:child_process";
import type { CameraRecord } from "../src/index.js";

/** Deterministic 32-bit generator so fixtures are stable across runs. */
export function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

export function plainCamera(
  image: string,
  overrides: Partial<CameraRecord> = {},
): CameraRecord {
  return {
    image,
    width: 48,
    height: 36,
    f: 24,
    cx: 0,
    cy: 0,
    b1: 0,
    b2: 0,
    k1: 0,
    k2: 0,
    k3: 0,
    k4: 0,
    k5: 0,
    p1: 0,
    p2: 0,
    p3: 0,
    p4: 0,
    x: 0,
    y: 0,
    z: 30,
    omega: 0,
    phi: 0,
    kappa: 0,
    ...overrides,
  };
}

/** Uniform cloud over a box the fixture cameras look down on. */
export function randomCloud(n: number, rng: () => number): Float64Array {
  const pts = new Float64Array(3 * n);
  for (let i = 0; i < n; i++) {
    pts[3 * i] = -10 + 20 * rng();
    pts[3 * i + 1] = -10 + 20 * rng();
    pts[3 * i + 2] = 6 * rng();
  }
  return pts;
}

export function randomLogits(
  height: number,
  width: number,
  classes: number,
  rng: () => number,
): Float64Array {
  const data = new Float64Array(height * width * classes);
  for (let iy = 0; iy < height; iy++) {
    for (let ix = 0; ix < width; ix++) {
      const base = (iy * width + ix) * classes;
      for (let k = 0; k < classes; k++) data[base + k] = rng();
      // plant a clear winner so labels are not noise-driven
      data[base + ((ix + iy) % classes)] += 3;
    }
  }
  return data;
}

/** Run the installed core binary directly, bypassing the client. */
export function runCli(args: string[]): string {
  return execFileSync(process.env.GRIDFUSE_BIN ?? "gridfuse", args, {
    encoding: "utf8",
    maxBuffer: 1 << 28,
  });
}

export function runPython(script: string, input?: Buffer): Buffer {
  return execFileSync("python3", ["-c", script], {
    input,
    maxBuffer: 1 << 28,
  });
}
