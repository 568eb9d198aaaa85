import { ChatApi } from "./api.js";
import { Conversation } from "./conversation.js";
import { findElements, wire } from "./render.js";

function randomUserId(): string {
  return `web-${Math.random().toString(36).slice(2, 10)}`;
}

const api = new ChatApi("");
const conversation = new Conversation(api, randomUserId());
wire(conversation, findElements(document));
