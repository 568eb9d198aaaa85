// Conversation state for the web chat: an append-only transcript, the
// current quick replies, a cart view, and the ended flag. One send is in
// flight at a time; the renderer locks the input while we wait.

import { ApiError, CartLine, ChatApi } from "./api.js";

export interface ChatMessage {
  author: "user" | "bot";
  text: string;
  time: Date;
  unsent?: boolean; // network failure: shown with a retry affordance
}

export type ConversationListener = () => void;

export class Conversation {
  sessionId: string | null = null;
  messages: ChatMessage[] = [];
  quickReplies: string[] = [];
  cartView: CartLine[] = [];
  cartStale = false;
  ended = false;
  busy = false;

  private listeners: ConversationListener[] = [];

  constructor(private api: ChatApi, private userId: string) {}

  onChange(listener: ConversationListener): void {
    this.listeners.push(listener);
  }

  private changed(): void {
    for (const listener of this.listeners) listener();
  }

  async send(text: string): Promise<void> {
    const trimmed = text.trim();
    if (!trimmed || this.ended || this.busy) return;
    this.quickReplies = []; // cleared after any send
    const mine: ChatMessage = { author: "user", text: trimmed, time: new Date() };
    this.messages.push(mine); // optimistic append
    this.busy = true;
    this.changed();
    try {
      const res = await this.api.chat({
        session_id: this.sessionId ?? undefined,
        user_id: this.userId,
        text: trimmed,
      });
      this.sessionId = res.session_id;
      for (const reply of res.replies) {
        this.messages.push({ author: "bot", text: reply, time: new Date() });
      }
      this.quickReplies = res.quick_replies;
      this.ended = res.ended;
      if (res.cart !== undefined) {
        await this.refreshCart();
      }
    } catch {
      mine.unsent = true;
    } finally {
      this.busy = false;
      this.changed();
    }
  }

  async retry(): Promise<void> {
    const failed = [...this.messages].reverse().find((m) => m.author === "user" && m.unsent);
    if (!failed || this.busy || this.ended) return;
    failed.unsent = false;
    this.busy = true;
    this.changed();
    try {
      const res = await this.api.chat({
        session_id: this.sessionId ?? undefined,
        user_id: this.userId,
        text: failed.text,
      });
      this.sessionId = res.session_id;
      for (const reply of res.replies) {
        this.messages.push({ author: "bot", text: reply, time: new Date() });
      }
      this.quickReplies = res.quick_replies;
      this.ended = res.ended;
      if (res.cart !== undefined) {
        await this.refreshCart();
      }
    } catch {
      failed.unsent = true;
    } finally {
      this.busy = false;
      this.changed();
    }
  }

  async refreshCart(): Promise<void> {
    if (!this.sessionId) return;
    try {
      const res = await this.api.cart(this.sessionId);
      this.cartView = res.lines;
      this.cartStale = false;
    } catch (err) {
      if (err instanceof ApiError && err.status === 404) {
        this.cartView = [];
        this.cartStale = false;
      } else {
        this.cartStale = true; // server unreachable: keep the last view
      }
    }
    this.changed();
  }
}
