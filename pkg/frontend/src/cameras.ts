/**
 * Camera pose/calibration records and the JSON file the core consumes.
 * Angles are stored in degrees on disk.
 */

import { writeFileSync } from "node:fs";
import { BoundaryError } from "./errors.js";

export interface CameraRecord {
  image: string;
  width: number;
  height: number;
  f: number;
  cx: number;
  cy: number;
  b1: number;
  b2: number;
  k1: number;
  k2: number;
  k3: number;
  k4: number;
  k5: number;
  p1: number;
  p2: number;
  p3: number;
  p4: number;
  x: number;
  y: number;
  z: number;
  omega: number;
  phi: number;
  kappa: number;
}

export const CAMERA_FIELDS: readonly (keyof CameraRecord)[] = [
  "image",
  "width",
  "height",
  "f",
  "cx",
  "cy",
  "b1",
  "b2",
  "k1",
  "k2",
  "k3",
  "k4",
  "k5",
  "p1",
  "p2",
  "p3",
  "p4",
  "x",
  "y",
  "z",
  "omega",
  "phi",
  "kappa",
];

/** Throw a BoundaryError naming the offending record and field. */
export function validateCameras(cameras: CameraRecord[]): void {
  if (cameras.length === 0) {
    throw new BoundaryError("camera list is empty");
  }
  const seen = new Set<string>();
  cameras.forEach((cam, idx) => {
    const label = cam.image ?? `#${idx}`;
    for (const field of CAMERA_FIELDS) {
      const value = (cam as unknown as Record<string, unknown>)[field];
      if (value === undefined || value === null) {
        throw new BoundaryError(`camera '${label}': missing field '${field}'`);
      }
      if (field === "image") {
        if (typeof value !== "string" || value.length === 0) {
          throw new BoundaryError(
            `camera '${label}': 'image' must be a non-empty string`,
          );
        }
      } else if (typeof value !== "number" || !Number.isFinite(value)) {
        throw new BoundaryError(
          `camera '${label}': field '${field}' must be a finite number, got ${String(value)}`,
        );
      }
    }
    if (!Number.isInteger(cam.width) || cam.width <= 0) {
      throw new BoundaryError(
        `camera '${label}': 'width' must be a positive integer, got ${cam.width}`,
      );
    }
    if (!Number.isInteger(cam.height) || cam.height <= 0) {
      throw new BoundaryError(
        `camera '${label}': 'height' must be a positive integer, got ${cam.height}`,
      );
    }
    if (cam.f <= 0) {
      throw new BoundaryError(
        `camera '${label}': 'f' must be positive, got ${cam.f}`,
      );
    }
    if (seen.has(cam.image)) {
      throw new BoundaryError(`duplicate camera image name '${cam.image}'`);
    }
    seen.add(cam.image);
  });
}

/** Serialize to the {"cameras": [...]} layout the CLI reads. */
export function cameraFileJson(cameras: CameraRecord[]): string {
  validateCameras(cameras);
  const records = cameras.map((cam) => {
    const obj: Record<string, unknown> = {};
    for (const field of CAMERA_FIELDS) obj[field] = cam[field];
    return obj;
  });
  return JSON.stringify({ cameras: records }, null, 2) + "\n";
}

export function writeCameraFile(path: string, cameras: CameraRecord[]): void {
  writeFileSync(path, cameraFileJson(cameras));
}
