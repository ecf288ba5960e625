#!/usr/bin/env node
/**
 * py-runner: one-shot sandboxed executor for generated Python programs.
 *
 * Protocol: a single RunRequest JSON object on stdin, a single
 * RunResponse JSON object on stdout.  Exit code 0 covers every
 * protocol-level success, including programs that error or time out;
 * nonzero means the request itself was unusable.
 */
import { spawn } from 'child_process';
import { mkdtempSync, rmSync } from 'fs';
import os from 'os';
import path from 'path';

interface RunRequest {
  program: string;
  table: { headers: string[]; rows: string[][] };
  timeout_ms: number;
  memory_mb: number;
}

interface RunResponse {
  status: 'ok' | 'error' | 'timeout';
  column: string[];
  error: string;
}

const DEFAULT_TIMEOUT_MS = 10_000;
const DEFAULT_MEMORY_MB = 512;

function readStdin(): Promise<string> {
  return new Promise((resolve, reject) => {
    let data = '';
    process.stdin.setEncoding('utf8');
    process.stdin.on('data', (chunk) => (data += chunk));
    process.stdin.on('end', () => resolve(data));
    process.stdin.on('error', reject);
  });
}

function parseRequest(raw: string): RunRequest {
  let parsed: any;
  try {
    parsed = JSON.parse(raw);
  } catch (err) {
    throw new Error(`request is not valid JSON: ${(err as Error).message}`);
  }
  if (typeof parsed !== 'object' || parsed === null) {
    throw new Error('request must be a JSON object');
  }
  if (typeof parsed.program !== 'string' || parsed.program.length === 0) {
    throw new Error('request field "program" must be a non-empty string');
  }
  const table = parsed.table;
  if (
    typeof table !== 'object' ||
    table === null ||
    !Array.isArray(table.headers) ||
    !Array.isArray(table.rows)
  ) {
    throw new Error('request field "table" must carry "headers" and "rows" arrays');
  }
  for (const row of table.rows) {
    if (!Array.isArray(row) || row.length !== table.headers.length) {
      throw new Error('every table row must match the header count');
    }
  }
  const timeoutMs = parsed.timeout_ms ?? DEFAULT_TIMEOUT_MS;
  if (typeof timeoutMs !== 'number' || timeoutMs <= 0) {
    throw new Error('request field "timeout_ms" must be a positive number');
  }
  const memoryMb = parsed.memory_mb ?? DEFAULT_MEMORY_MB;
  if (typeof memoryMb !== 'number' || memoryMb <= 0) {
    throw new Error('request field "memory_mb" must be a positive number');
  }
  return {
    program: parsed.program,
    table: { headers: table.headers, rows: table.rows },
    timeout_ms: timeoutMs,
    memory_mb: memoryMb,
  };
}

function executeProgram(request: RunRequest): Promise<RunResponse> {
  const scratch = mkdtempSync(path.join(os.tmpdir(), 'py-runner-'));
  const bootstrap = path.join(__dirname, 'bootstrap.py');
  return new Promise<RunResponse>((resolve, reject) => {
    const child = spawn('python3', [bootstrap], {
      cwd: scratch,
      stdio: ['pipe', 'pipe', 'pipe'],
    });
    let stdout = '';
    let stderr = '';
    let timedOut = false;
    child.stdout.setEncoding('utf8');
    child.stderr.setEncoding('utf8');
    child.stdout.on('data', (chunk) => (stdout += chunk));
    child.stderr.on('data', (chunk) => (stderr += chunk));
    const timer = setTimeout(() => {
      timedOut = true;
      child.kill('SIGKILL');
    }, request.timeout_ms);
    child.on('error', (err) => {
      clearTimeout(timer);
      reject(new Error(`failed to start worker: ${err.message}`));
    });
    child.on('close', (code) => {
      clearTimeout(timer);
      if (timedOut) {
        resolve({
          status: 'timeout',
          column: [],
          error: `timed out after ${request.timeout_ms}ms`,
        });
        return;
      }
      if (code !== 0) {
        // The worker handles program failures itself; a nonzero exit
        // means the process died hard (OOM kill, crash in the wrapper).
        resolve({
          status: 'error',
          column: [],
          error: stderr.trim().split('\n').pop() || `worker exited with code ${code}`,
        });
        return;
      }
      let payload: any;
      try {
        payload = JSON.parse(stdout);
      } catch {
        reject(new Error(`worker produced malformed output: ${stdout.slice(0, 200)}`));
        return;
      }
      resolve({
        status: payload.status,
        column: payload.column ?? [],
        error: payload.error ?? '',
      });
    });
    child.stdin.write(JSON.stringify(request));
    child.stdin.end();
  }).finally(() => {
    rmSync(scratch, { recursive: true, force: true });
  });
}

async function main(): Promise<void> {
  const args = process.argv.slice(2);
  if (args.length !== 1 || args[0] !== 'run') {
    process.stderr.write('usage: py-runner run  (RunRequest JSON on stdin)\n');
    process.exit(2);
  }
  let request: RunRequest;
  try {
    request = parseRequest(await readStdin());
  } catch (err) {
    process.stderr.write(`error: ${(err as Error).message}\n`);
    process.exit(1);
  }
  try {
    const response = await executeProgram(request!);
    process.stdout.write(JSON.stringify(response) + '\n');
  } catch (err) {
    process.stderr.write(`error: ${(err as Error).message}\n`);
    process.exit(1);
  }
}

main();
