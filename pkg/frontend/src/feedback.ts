/** Local-only helpful / not-helpful feedback stored in the browser. */

export type FeedbackValue = "helpful" | "not-helpful";

const KEY = "tutorkit-feedback";

interface FeedbackRecord {
  [turnKey: string]: FeedbackValue;
}

function read(storage: Storage): FeedbackRecord {
  try {
    return JSON.parse(storage.getItem(KEY) ?? "{}") as FeedbackRecord;
  } catch {
    return {};
  }
}

export function recordFeedback(
  storage: Storage,
  sessionId: string,
  turnIndex: number,
  value: FeedbackValue,
): void {
  const all = read(storage);
  all[`${sessionId}:${turnIndex}`] = value;
  storage.setItem(KEY, JSON.stringify(all));
}

export function getFeedback(
  storage: Storage,
  sessionId: string,
  turnIndex: number,
): FeedbackValue | null {
  return read(storage)[`${sessionId}:${turnIndex}`] ?? null;
}
