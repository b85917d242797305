export { BoundaryError, CliError } from "./errors.js";
export { parseNpy, buildNpy, expectNpy } from "./npy.js";
export type { NpyArray, NpyData } from "./npy.js";
export { readZip, readSubmission } from "./npz.js";
export type { SubmissionOptions } from "./npz.js";
export {
  CAMERA_FIELDS,
  validateCameras,
  cameraFileJson,
  writeCameraFile,
} from "./cameras.js";
export type { CameraRecord } from "./cameras.js";
export { GridfuseClient } from "./client.js";
export type {
  ClientOptions,
  LogitImage,
  ProjectionResult,
  DepthMap,
  ConfusionTable,
  EvalResult,
  RunDirs,
} from "./client.js";
