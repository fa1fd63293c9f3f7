/** Wire shapes of the session service. The UI renders these verbatim;
 * it never derives a probability on its own. */

export type DirectionName = "forward" | "backward";

export type FormatName =
  | "cued_recall"
  | "multiple_choice"
  | "multiple_choice_with_none"
  | "true_false"
  | "self_graded";

export interface DeckSummary {
  deck_id: string;
  size: number;
}

export interface QuestionView {
  kc_id: string;
  direction: DirectionName;
  format: FormatName;
  options_count?: number;
  prompt: string;
  options: string[];
  predicted_recall: number;
  /** Present only for self-graded cards, which reveal their answer. */
  answer?: string;
}

export interface ItemView {
  kc_id: string;
  predicted_recall: number;
  cold_start: boolean;
}

export interface ProgressCounters {
  mastered: number;
  total: number;
  mean_predicted: number;
  answers: number;
}

export interface LastAnswer {
  kc_id: string;
  correct: boolean;
  expected_answer: string;
}

export interface SessionView {
  session_id: string;
  deck_id: string;
  deck_size: number;
  model: string;
  direction: DirectionName;
  mastery_threshold: number;
  complete: boolean;
  current_question: QuestionView | null;
  items: ItemView[];
  progress: ProgressCounters;
  last_answer?: LastAnswer;
}

export interface NextResponse {
  complete: boolean;
  question?: QuestionView;
}

export interface ProgressView {
  items: {
    kc_id: string;
    direction: DirectionName;
    predicted_recall: number;
    cold_start: boolean;
  }[];
  mastered: number;
  mean_predicted: number;
  complete: boolean;
  mastery_threshold: number;
}

export interface AnswerBody {
  kc_id: string;
  direction: DirectionName;
  format: FormatName;
  options_count?: number;
  correct?: boolean;
  typed_answer?: string;
}
