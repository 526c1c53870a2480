/**
 * The five relevance labels and their keyboard bindings.
 */

export const LABELS = ['ND', 'DS', 'CS', 'IS', 'DI'] as const;

export type Label = (typeof LABELS)[number];

/** Digit row bindings: 1 through 5 in label order. */
export const KEY_TO_LABEL: Readonly<Record<string, Label>> = {
  '1': 'ND',
  '2': 'DS',
  '3': 'CS',
  '4': 'IS',
  '5': 'DI',
};

const LABEL_NAMES: Readonly<Record<Label, string>> = {
  ND: 'near duplicate',
  DS: 'duplicate scene',
  CS: 'complementary scene',
  IS: 'incident scene',
  DI: 'distinct incident',
};

/**
 * Map a KeyboardEvent.key to a label, or null for any other key.
 */
export function labelForKey(key: string): Label | null {
  return KEY_TO_LABEL[key] ?? null;
}

/** Human-readable name for a label code. */
export function labelName(label: Label): string {
  return LABEL_NAMES[label];
}

export function isLabel(value: string): value is Label {
  return (LABELS as readonly string[]).includes(value);
}
