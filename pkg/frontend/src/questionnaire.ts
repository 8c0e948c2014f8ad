/**
 * Questionnaire form state. TLX: six workload subscales on 0-100 sliders.
 * SUS: ten usability statements on 1-5 agreement items. Submission stays
 * blocked until every item is answered and in range; scoring happens
 * server-side.
 */

import { ControlMessage } from "./protocol.js";

export const TLX_SUBSCALES = [
  "Mental demand",
  "Physical demand",
  "Temporal demand",
  "Performance",
  "Effort",
  "Frustration",
] as const;

export const SUS_ITEMS = [
  "I think that I would like to use this device frequently.",
  "I found the device unnecessarily complex.",
  "I thought the device was easy to use.",
  "I think that I would need the support of a technical person to be able to use this device.",
  "I found the various functions in this device were well integrated.",
  "I thought there was too much inconsistency in this device.",
  "I would imagine that most people would learn to use this device very quickly.",
  "I found the device very cumbersome to use.",
  "I felt very confident using the device.",
  "I needed to learn a lot of things before I could get going with this device.",
] as const;

export interface QuestionnaireForm {
  kind: "tlx" | "sus";
  responses: (number | null)[];
}

export function newForm(kind: "tlx" | "sus"): QuestionnaireForm {
  const n = kind === "tlx" ? TLX_SUBSCALES.length : SUS_ITEMS.length;
  return { kind, responses: new Array(n).fill(null) };
}

export function setResponse(
  form: QuestionnaireForm,
  index: number,
  value: number,
): void {
  if (index < 0 || index >= form.responses.length) {
    throw new Error(`no item ${index} on this form`);
  }
  form.responses[index] = value;
}

export function validationErrors(form: QuestionnaireForm): string[] {
  const [lo, hi] = form.kind === "tlx" ? [0, 100] : [1, 5];
  const errors: string[] = [];
  form.responses.forEach((value, i) => {
    if (value === null) {
      errors.push(`item ${i + 1} is unanswered`);
    } else if (value < lo || value > hi) {
      errors.push(`item ${i + 1} out of range [${lo}, ${hi}]`);
    }
  });
  return errors;
}

export function canSubmit(form: QuestionnaireForm): boolean {
  return validationErrors(form).length === 0;
}

export function submission(form: QuestionnaireForm): ControlMessage {
  const errors = validationErrors(form);
  if (errors.length > 0) {
    throw new Error(`form incomplete: ${errors[0]}`);
  }
  return {
    type: "control",
    action: "questionnaire_submit",
    kind: form.kind,
    items: form.responses.map((v) => v as number),
  };
}
