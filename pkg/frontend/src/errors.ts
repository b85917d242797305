/** Input failed shape/dtype/consistency checks before reaching the core. */
export class BoundaryError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "BoundaryError";
  }
}

/** The core binary exited nonzero; carries its stderr and exit code. */
export class CliError extends Error {
  readonly exitCode: number;
  readonly stderr: string;

  constructor(command: string[], exitCode: number, stderr: string) {
    super(
      `gridfuse ${command.join(" ")} failed with exit code ${exitCode}: ${stderr.trim()}`,
    );
    this.name = "CliError";
    this.exitCode = exitCode;
    this.stderr = stderr;
  }
}
