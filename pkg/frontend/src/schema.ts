/** Rating payload types and client-side validation.
 *
 * Mirrors schemas/rating_submission.schema.json (the shared contract with the
 * service); the test suite checks the two stay in agreement.
 */

export const RATING_METRICS = [
  "Empathy",
  "Informativeness",
  "Coherence",
  "Suggestion",
  "Understanding",
  "Helpfulness",
  "Overall",
] as const;

export type RatingMetric = (typeof RATING_METRICS)[number];
export type LikertScores = Record<RatingMetric, number>;

export const AB_CHOICES = ["A wins", "Tie", "B wins"] as const;
export type AbChoice = (typeof AB_CHOICES)[number];

export type RatingSubmission =
  | { scores: LikertScores; comment?: string | null }
  | { ab_choice: AbChoice; comment?: string | null };

/** All seven metrics set and in 1..5 -> payload; otherwise null. */
export function buildScoresPayload(
  partial: Partial<Record<RatingMetric, number>>,
  comment?: string,
): RatingSubmission | null {
  const scores = {} as LikertScores;
  for (const metric of RATING_METRICS) {
    const value = partial[metric];
    if (value === undefined || !Number.isInteger(value) || value < 1 || value > 5) {
      return null;
    }
    scores[metric] = value;
  }
  const payload: RatingSubmission = { scores };
  if (comment) payload.comment = comment;
  return payload;
}

export function buildAbPayload(choice: string, comment?: string): RatingSubmission | null {
  if (!(AB_CHOICES as readonly string[]).includes(choice)) return null;
  const payload: RatingSubmission = { ab_choice: choice as AbChoice };
  if (comment) payload.comment = comment;
  return payload;
}

function isPlainObject(value: unknown): value is Record<string, unknown> {
  return typeof value === "object" && value !== null && !Array.isArray(value);
}

/** Returns a list of problems; empty means the payload satisfies the shared schema. */
export function validateRatingSubmission(payload: unknown): string[] {
  if (!isPlainObject(payload)) return ["payload must be an object"];
  const problems: string[] = [];
  const hasScores = "scores" in payload;
  const hasChoice = "ab_choice" in payload;
  if (hasScores === hasChoice) {
    return ["payload must have exactly one of scores / ab_choice"];
  }
  for (const key of Object.keys(payload)) {
    if (!["scores", "ab_choice", "comment"].includes(key)) {
      problems.push(`unexpected property ${key}`);
    }
  }
  if ("comment" in payload && payload.comment !== null && typeof payload.comment !== "string") {
    problems.push("comment must be a string or null");
  }
  if (hasScores) {
    const scores = payload.scores;
    if (!isPlainObject(scores)) return ["scores must be an object"];
    for (const metric of RATING_METRICS) {
      const value = scores[metric];
      if (value === undefined) {
        problems.push(`missing metric ${metric}`);
      } else if (!Number.isInteger(value) || (value as number) < 1 || (value as number) > 5) {
        problems.push(`${metric} must be an integer in 1..5`);
      }
    }
    for (const key of Object.keys(scores)) {
      if (!(RATING_METRICS as readonly string[]).includes(key)) {
        problems.push(`unexpected metric ${key}`);
      }
    }
  } else if (!(AB_CHOICES as readonly string[]).includes(payload.ab_choice as string)) {
    problems.push(`ab_choice must be one of ${AB_CHOICES.join(" / ")}`);
  }
  return problems;
}
