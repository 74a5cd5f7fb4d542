import { readFileSync } from "node:fs";
import { join, dirname } from "node:path";
import { fileURLToPath } from "node:url";

export const FRONTEND_ROOT = join(dirname(fileURLToPath(import.meta.url)), "..");
export const REPO_ROOT = join(FRONTEND_ROOT, "..");

// --- minimal JSON-schema interpreter (covers the constructs the shared file uses) ---

type Schema = Record<string, unknown>;

function checkType(value: unknown, type: string): boolean {
  switch (type) {
    case "object":
      return typeof value === "object" && value !== null && !Array.isArray(value);
    case "string":
      return typeof value === "string";
    case "integer":
      return typeof value === "number" && Number.isInteger(value);
    case "null":
      return value === null;
    default:
      throw new Error(`unsupported type in schema: ${type}`);
  }
}

export function schemaAccepts(schema: Schema, value: unknown): boolean {
  if (Array.isArray(schema.oneOf)) {
    const matches = (schema.oneOf as Schema[]).filter((sub) => schemaAccepts(sub, value));
    return matches.length === 1;
  }
  if (schema.enum !== undefined) {
    return (schema.enum as unknown[]).some((candidate) => candidate === value);
  }
  if (schema.type !== undefined) {
    const types = Array.isArray(schema.type) ? (schema.type as string[]) : [schema.type as string];
    if (!types.some((type) => checkType(value, type))) return false;
  }
  if (typeof value === "number") {
    if (schema.minimum !== undefined && value < (schema.minimum as number)) return false;
    if (schema.maximum !== undefined && value > (schema.maximum as number)) return false;
  }
  if (typeof value === "object" && value !== null && !Array.isArray(value)) {
    const record = value as Record<string, unknown>;
    const properties = (schema.properties as Record<string, Schema>) ?? {};
    for (const key of (schema.required as string[]) ?? []) {
      if (!(key in record)) return false;
    }
    for (const [key, sub] of Object.entries(properties)) {
      if (key in record && !schemaAccepts(sub, record[key])) return false;
    }
    if (schema.additionalProperties === false) {
      for (const key of Object.keys(record)) {
        if (!(key in properties)) return false;
      }
    }
  }
  return true;
}

export function loadSharedSchema(): Schema {
  const path = join(REPO_ROOT, "schemas", "rating_submission.schema.json");
  return JSON.parse(readFileSync(path, "utf-8")) as Schema;
}

// --- DOM driving ----------------------------------------------------------------

export function el<T extends HTMLElement>(testId: string): T {
  const node = document.querySelector<T>(`[data-testid="${testId}"]`);
  if (!node) throw new Error(`no element with data-testid=${testId}`);
  return node;
}

export function maybeEl<T extends HTMLElement>(testId: string): T | null {
  return document.querySelector<T>(`[data-testid="${testId}"]`);
}

export function setInput(testId: string, value: string): void {
  const input = el<HTMLInputElement>(testId);
  input.value = value;
  input.dispatchEvent(new Event("input", { bubbles: true }));
}

export function click(testId: string): void {
  el<HTMLButtonElement>(testId).click();
}

export function checkRadio(name: string, value: string): void {
  const radio = document.querySelector<HTMLInputElement>(`input[name="${name}"][value="${value}"]`);
  if (!radio) throw new Error(`no radio ${name}=${value}`);
  radio.checked = true;
  radio.dispatchEvent(new Event("change", { bubbles: true }));
}

export async function waitFor(predicate: () => boolean, timeoutMs = 15_000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    if (predicate()) return;
    await new Promise((resolve) => setTimeout(resolve, 25));
  }
  throw new Error("waitFor timed out");
}
