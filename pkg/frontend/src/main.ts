import { App } from "./app.js";
import { Client } from "./api.js";

document.addEventListener("DOMContentLoaded", () => {
  const root = document.getElementById("app");
  if (root) new App(root, new Client(""));
});
