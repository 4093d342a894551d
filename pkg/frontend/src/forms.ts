/** Schema-driven enrollment form: field specs, client-side range validation
 * mirroring the gateway's rules, and mapping of gateway error envelopes back
 * onto fields. */

import type { ErrorInfo, FeatureDef, RecordPayload, Schema } from "./types.js";

export interface FieldError {
  fieldId: string;
  message: string;
}

export type FieldValidation =
  | { ok: true; value: number }
  | { ok: false; message: string };

export function validateField(def: FeatureDef, raw: string): FieldValidation {
  const text = raw.trim();
  if (text === "") {
    return { ok: false, message: "required" };
  }
  const value = Number(text);
  if (!Number.isFinite(value)) {
    return { ok: false, message: "must be a number" };
  }
  if (def.kind === "binary") {
    if (value !== 0 && value !== 1) {
      return { ok: false, message: "must be 0 or 1" };
    }
  } else if (def.kind === "ordinal") {
    const arity = def.params.arity ?? 0;
    if (!Number.isInteger(value) || value < 0 || value > arity - 1) {
      return { ok: false, message: `must be an integer in 0..${arity - 1}` };
    }
  } else {
    const lo = def.params.lo ?? 0;
    const hi = def.params.hi ?? 1;
    if (value < lo || value > hi) {
      return { ok: false, message: `must be in [${lo}, ${hi}]` };
    }
  }
  return { ok: true, value };
}

export interface BuiltRecord {
  record: RecordPayload | null;
  errors: FieldError[];
}

export function buildRecord(
  schema: Schema,
  subjectId: string,
  localityId: string,
  collectedAt: number,
  rawValues: ReadonlyMap<string, string>,
): BuiltRecord {
  const errors: FieldError[] = [];
  if (!subjectId.trim()) {
    errors.push({ fieldId: "subject_id", message: "required" });
  }
  if (!localityId.trim()) {
    errors.push({ fieldId: "locality_id", message: "required" });
  }
  const values: number[] = [];
  for (const def of schema.features) {
    const check = validateField(def, rawValues.get(def.id) ?? "");
    if (check.ok) {
      values.push(check.value);
    } else {
      errors.push({ fieldId: def.id, message: check.message });
    }
  }
  if (errors.length > 0) {
    return { record: null, errors };
  }
  return {
    record: {
      subject_id: subjectId.trim(),
      locality_id: localityId.trim(),
      values,
      collected_at: collectedAt,
    },
    errors: [],
  };
}

/** The gateway names the offending feature in error.field; surface it on the
 * matching form field, or as a form-level error otherwise. */
export function gatewayErrorToFieldErrors(error: ErrorInfo): FieldError[] {
  if (error.field) {
    return [{ fieldId: error.field, message: error.message }];
  }
  return [{ fieldId: "", message: error.message }];
}
