/**
 * Typed wrapper around the gridfuse command line tool.
 *
 * Every method validates its inputs up front, writes them to a scratch
 * directory in the exact on-disk formats the core reads, runs one CLI
 * subcommand, and parses the files it wrote back into typed arrays.
 * Nothing is computed here; outputs are the core's bytes.
 */

import { execFileSync } from "node:child_process";
import {
  mkdtempSync,
  mkdirSync,
  readFileSync,
  rmSync,
  writeFileSync,
} from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { BoundaryError, CliError } from "./errors.js";
import { CameraRecord, cameraFileJson, validateCameras } from "./cameras.js";
import { buildNpy, parseNpy, expectNpy } from "./npy.js";

export interface ClientOptions {
  /** Path to the executable; defaults to $GRIDFUSE_BIN, then "gridfuse". */
  bin?: string;
  /** Parent directory for scratch space; defaults to the OS temp dir. */
  workDir?: string;
  /** Worker thread count forwarded via GRIDFUSE_THREADS. */
  threads?: number;
}

/** Row-major (H, W, K) class scores for one image. */
export interface LogitImage {
  height: number;
  width: number;
  classes: number;
  data: Float64Array;
}

export interface ProjectionResult {
  /** Pixel x, already distorted; meaningful only where status is 0. */
  pixelX: Float64Array;
  pixelY: Float64Array;
  /** Positive depth along the viewing direction. */
  depth: Float64Array;
  /** 0 in frame, 1 outside the frame, 2 behind the camera. */
  status: Uint8Array;
}

export interface DepthMap {
  height: number;
  width: number;
  /** Row-major float32 grid, +Infinity where nothing projected. */
  grid: Float32Array;
}

export interface ConfusionTable {
  /** Predicted-class column labels. */
  classes: number[];
  /** rows[gt][pred] counts, one row per ground-truth class. */
  rows: number[][];
  /** Unlabeled-prediction count per ground-truth class. */
  abstain: number[];
}

export interface EvalResult {
  /** Per-class IoU; null where the class never occurs. */
  perClass: (number | null)[];
  meanIou: number;
  confusion: ConfusionTable;
}

export interface RunDirs {
  /**
   * Keep inputs and outputs in this directory (in/ and out/) instead of
   * scratch space that is deleted afterwards.
   */
  keepDir?: string;
}

function validateCloud(cloud: Float64Array): number {
  if (!(cloud instanceof Float64Array)) {
    throw new BoundaryError(
      `cloud: expected a Float64Array of xyz triples, got ${Object.prototype.toString.call(cloud)}`,
    );
  }
  if (cloud.length === 0 || cloud.length % 3 !== 0) {
    throw new BoundaryError(
      `cloud: expected a non-empty length divisible by 3, got ${cloud.length}`,
    );
  }
  return cloud.length / 3;
}

function validateLabels(name: string, labels: Uint8Array): void {
  if (!(labels instanceof Uint8Array)) {
    throw new BoundaryError(
      `${name}: expected a Uint8Array, got ${Object.prototype.toString.call(labels)}`,
    );
  }
  if (labels.length === 0) {
    throw new BoundaryError(`${name}: expected at least one label`);
  }
}

function validateLogits(
  cameras: CameraRecord[],
  logits: Map<string, LogitImage>,
): void {
  const images = new Set(cameras.map((c) => c.image));
  for (const name of logits.keys()) {
    if (!images.has(name)) {
      throw new BoundaryError(
        `logits: image '${name}' does not match any camera record`,
      );
    }
  }
  let classes: number | null = null;
  let first = "";
  for (const cam of cameras) {
    const img = logits.get(cam.image);
    if (!img) {
      throw new BoundaryError(
        `logits: missing scores for camera '${cam.image}'`,
      );
    }
    if (!(img.data instanceof Float64Array)) {
      throw new BoundaryError(
        `logits '${cam.image}': expected Float64Array data`,
      );
    }
    if (img.height !== cam.height || img.width !== cam.width) {
      throw new BoundaryError(
        `logits '${cam.image}': expected shape (${cam.height}, ${cam.width}, K) ` +
          `to match the camera frame, got (${img.height}, ${img.width}, ${img.classes})`,
      );
    }
    if (!Number.isInteger(img.classes) || img.classes < 2) {
      throw new BoundaryError(
        `logits '${cam.image}': class count must be an integer >= 2, got ${img.classes}`,
      );
    }
    if (img.data.length !== img.height * img.width * img.classes) {
      throw new BoundaryError(
        `logits '${cam.image}': expected ${img.height * img.width * img.classes} ` +
          `values for (${img.height}, ${img.width}, ${img.classes}), got ${img.data.length}`,
      );
    }
    if (classes === null) {
      classes = img.classes;
      first = cam.image;
    } else if (img.classes !== classes) {
      throw new BoundaryError(
        `logits: expected one class count across images, got K=${img.classes} ` +
          `for '${cam.image}' after K=${classes} for '${first}'`,
      );
    }
  }
}

function csvLines(text: string): string[] {
  // the core writes \r\n row terminators
  return text
    .trim()
    .split("\n")
    .map((line) => line.replace(/\r$/, ""));
}

function parseIouCsv(text: string): {
  perClass: (number | null)[];
  meanIou: number;
} {
  const lines = csvLines(text);
  const perClass: (number | null)[] = [];
  let meanIou = NaN;
  for (const line of lines.slice(1)) {
    const [id, name, iou] = line.split(",");
    if (id === "" && name === "mIoU") {
      meanIou = Number(iou);
    } else {
      perClass.push(iou === "" ? null : Number(iou));
    }
  }
  if (!Number.isFinite(meanIou)) {
    throw new CliError(["eval"], 0, "report CSV is missing the mIoU row");
  }
  return { perClass, meanIou };
}

function parseConfusionCsv(text: string): ConfusionTable {
  const lines = csvLines(text);
  const header = lines[0].split(",");
  const classes = header.slice(1, -1).map(Number);
  const rows: number[][] = [];
  const abstain: number[] = [];
  for (const line of lines.slice(1)) {
    const cells = line.split(",").map(Number);
    rows.push(cells.slice(1, -1));
    abstain.push(cells[cells.length - 1]);
  }
  return { classes, rows, abstain };
}

export class GridfuseClient {
  private readonly bin: string;
  private readonly workDir: string;
  private readonly threads?: number;

  constructor(options: ClientOptions = {}) {
    this.bin = options.bin ?? process.env.GRIDFUSE_BIN ?? "gridfuse";
    this.workDir = options.workDir ?? tmpdir();
    this.threads = options.threads;
  }

  /** Version string reported by the executable. */
  version(): string {
    return this.run(["--version"]).trim();
  }

  private run(args: string[]): string {
    const env = { ...process.env };
    if (this.threads !== undefined) {
      env.GRIDFUSE_THREADS = String(this.threads);
    }
    try {
      return execFileSync(this.bin, args, {
        encoding: "utf8",
        env,
        maxBuffer: 1 << 28,
      });
    } catch (err) {
      const e = err as { status?: number | null; stderr?: string };
      if (typeof e.status === "number") {
        throw new CliError(args, e.status, e.stderr ?? "");
      }
      throw err;
    }
  }

  private withScratch<T>(dirs: RunDirs, body: (root: string) => T): T {
    if (dirs.keepDir) {
      mkdirSync(dirs.keepDir, { recursive: true });
      return body(dirs.keepDir);
    }
    const root = mkdtempSync(join(this.workDir, "gridfuse-"));
    try {
      return body(root);
    } finally {
      rmSync(root, { recursive: true, force: true });
    }
  }

  private stageCloud(dir: string, cloud: Float64Array, count: number): string {
    const path = join(dir, "cloud.npy");
    writeFileSync(path, buildNpy("<f8", [count, 3], cloud));
    return path;
  }

  private stageCameras(dir: string, cameras: CameraRecord[]): string {
    const path = join(dir, "cameras.json");
    writeFileSync(path, cameraFileJson(cameras));
    return path;
  }

  /**
   * Project a cloud into one camera.  Row i of the result describes
   * point i; points never fail individually, they are flagged by status.
   */
  project(
    cameras: CameraRecord[],
    image: string,
    cloud: Float64Array,
    dirs: RunDirs = {},
  ): ProjectionResult {
    validateCameras(cameras);
    const count = validateCloud(cloud);
    if (!cameras.some((c) => c.image === image)) {
      throw new BoundaryError(
        `project: camera '${image}' is not in the camera list`,
      );
    }
    return this.withScratch(dirs, (root) => {
      const inDir = join(root, "in");
      const outDir = join(root, "out");
      mkdirSync(inDir, { recursive: true });
      this.run([
        "project",
        "--cameras",
        this.stageCameras(inDir, cameras),
        "--camera",
        image,
        "--points",
        this.stageCloud(inDir, cloud, count),
        "--out",
        outDir,
      ]);
      const arr = expectNpy(
        parseNpy(readFileSync(join(outDir, "projections.npy"))),
        "<f8",
        2,
        "projections.npy",
      );
      const [n, cols] = arr.shape;
      if (n !== count || cols !== 4) {
        throw new CliError(
          ["project"],
          0,
          `expected a (${count}, 4) result, got (${n}, ${cols})`,
        );
      }
      const data = arr.data as Float64Array;
      const pixelX = new Float64Array(n);
      const pixelY = new Float64Array(n);
      const depth = new Float64Array(n);
      const status = new Uint8Array(n);
      for (let i = 0; i < n; i++) {
        pixelX[i] = data[4 * i];
        pixelY[i] = data[4 * i + 1];
        depth[i] = data[4 * i + 2];
        status[i] = data[4 * i + 3];
      }
      return { pixelX, pixelY, depth, status };
    });
  }

  /** Render a depth map per camera (or one camera when image is given). */
  depthMaps(
    cameras: CameraRecord[],
    cloud: Float64Array,
    options: { buffer?: number; image?: string } = {},
    dirs: RunDirs = {},
  ): Map<string, DepthMap> {
    validateCameras(cameras);
    const count = validateCloud(cloud);
    if (options.image && !cameras.some((c) => c.image === options.image)) {
      throw new BoundaryError(
        `depthMaps: camera '${options.image}' is not in the camera list`,
      );
    }
    return this.withScratch(dirs, (root) => {
      const inDir = join(root, "in");
      const outDir = join(root, "out");
      mkdirSync(inDir, { recursive: true });
      const args = [
        "depthmap",
        "--cameras",
        this.stageCameras(inDir, cameras),
        "--cloud",
        this.stageCloud(inDir, cloud, count),
        "--out",
        outDir,
      ];
      if (options.buffer !== undefined) {
        args.push("--buffer", String(options.buffer));
      }
      if (options.image) args.push("--camera", options.image);
      this.run(args);
      const wanted = options.image
        ? cameras.filter((c) => c.image === options.image)
        : cameras;
      const out = new Map<string, DepthMap>();
      for (const cam of wanted) {
        const arr = expectNpy(
          parseNpy(readFileSync(join(outDir, `${cam.image}.npy`))),
          "<f4",
          2,
          `${cam.image}.npy`,
        );
        out.set(cam.image, {
          height: arr.shape[0],
          width: arr.shape[1],
          grid: arr.data as Float32Array,
        });
      }
      return out;
    });
  }

  /**
   * Fuse per-image class scores onto the cloud.  Returns one uint8
   * label per point, 255 where no camera saw the point.
   */
  transfer(
    cameras: CameraRecord[],
    cloud: Float64Array,
    logits: Map<string, LogitImage>,
    options: {
      tau?: number;
      buffer?: number;
      weighting?: "uniform" | "invdist";
      bilinear?: boolean;
    } = {},
    dirs: RunDirs = {},
  ): Uint8Array {
    validateCameras(cameras);
    const count = validateCloud(cloud);
    validateLogits(cameras, logits);
    return this.withScratch(dirs, (root) => {
      const inDir = join(root, "in");
      const outDir = join(root, "out");
      const logitDir = join(inDir, "logits");
      mkdirSync(logitDir, { recursive: true });
      for (const [name, img] of logits) {
        writeFileSync(
          join(logitDir, `${name}.npy`),
          buildNpy("<f8", [img.height, img.width, img.classes], img.data),
        );
      }
      const args = [
        "transfer",
        "--cameras",
        this.stageCameras(inDir, cameras),
        "--cloud",
        this.stageCloud(inDir, cloud, count),
        "--logits",
        logitDir,
        "--out",
        outDir,
      ];
      if (options.tau !== undefined) args.push("--tau", String(options.tau));
      if (options.buffer !== undefined) {
        args.push("--buffer", String(options.buffer));
      }
      if (options.weighting) args.push("--weighting", options.weighting);
      if (options.bilinear) args.push("--bilinear");
      this.run(args);
      const arr = expectNpy(
        parseNpy(readFileSync(join(outDir, "labels.npy"))),
        "|u1",
        1,
        "labels.npy",
      );
      if (arr.shape[0] !== count) {
        throw new CliError(
          ["transfer"],
          0,
          `expected ${count} labels, got ${arr.shape[0]}`,
        );
      }
      return arr.data as Uint8Array;
    });
  }

  /** Score predictions against ground truth of the same length. */
  evaluate(
    pred: Uint8Array,
    gt: Uint8Array,
    options: { classes?: number } = {},
    dirs: RunDirs = {},
  ): EvalResult {
    validateLabels("pred", pred);
    validateLabels("gt", gt);
    if (pred.length !== gt.length) {
      throw new BoundaryError(
        `evaluate: expected matching lengths, got pred ${pred.length} vs gt ${gt.length}`,
      );
    }
    return this.withScratch(dirs, (root) => {
      const inDir = join(root, "in");
      const outDir = join(root, "out");
      mkdirSync(inDir, { recursive: true });
      const predPath = join(inDir, "pred.npy");
      const gtPath = join(inDir, "gt.npy");
      writeFileSync(predPath, buildNpy("|u1", [pred.length], pred));
      writeFileSync(gtPath, buildNpy("|u1", [gt.length], gt));
      const args = [
        "eval",
        "--pred",
        predPath,
        "--gt",
        gtPath,
        "--out",
        outDir,
      ];
      if (options.classes !== undefined) {
        args.push("--classes", String(options.classes));
      }
      this.run(args);
      const iou = parseIouCsv(
        readFileSync(join(outDir, "per_class_iou.csv"), "utf8"),
      );
      const confusion = parseConfusionCsv(
        readFileSync(join(outDir, "confusion.csv"), "utf8"),
      );
      return { ...iou, confusion };
    });
  }

  /**
   * Build a submission archive from per-zone labels.  The archive bytes
   * are deterministic for identical inputs.
   */
  submit(
    labelsByZone: Map<string, Uint8Array>,
    options: {
      subset?: "train" | "val" | "test";
      classes?: number;
      /** zone -> subset assignments replacing the built-in table */
      zones?: Map<string, string>;
    } = {},
    dirs: RunDirs = {},
  ): Buffer {
    if (labelsByZone.size === 0) {
      throw new BoundaryError("submit: no zones given");
    }
    for (const [zone, labels] of labelsByZone) {
      validateLabels(`zone '${zone}'`, labels);
    }
    return this.withScratch(dirs, (root) => {
      const inDir = join(root, "in");
      const labelDir = join(inDir, "labels");
      const outDir = join(root, "out");
      mkdirSync(labelDir, { recursive: true });
      mkdirSync(outDir, { recursive: true });
      for (const [zone, labels] of labelsByZone) {
        writeFileSync(
          join(labelDir, `${zone}.npy`),
          buildNpy("|u1", [labels.length], labels),
        );
      }
      const archive = join(outDir, "submission.npz");
      const args = ["submit", "--labels", labelDir, "--out", archive];
      if (options.subset) args.push("--subset", options.subset);
      if (options.classes !== undefined) {
        args.push("--classes", String(options.classes));
      }
      if (options.zones) {
        const table = join(inDir, "zones.txt");
        const lines = [...options.zones]
          .map(([zone, subset]) => `${zone} ${subset}`)
          .join("\n");
        writeFileSync(table, lines + "\n");
        args.push("--zones", table);
      }
      this.run(args);
      return readFileSync(archive);
    });
  }
}
