// Browser entry point: mount the console against the origin that served it.
import { Client } from "./api.js";
import { mountConsole } from "./app.js";

const root = document.getElementById("app");
if (root) {
  void mountConsole(root, new Client(""));
}
