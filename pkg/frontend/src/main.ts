// main.ts
// ----------------------------------------------------------------------
// Bootstrap: one client, one store, one mount point.  The service base
// URL is same-origin ("" ) when the page is served by `treesim serve
// --ui`, and can be overridden with ?api=http://host:port for a service
// running elsewhere.
// ----------------------------------------------------------------------
import { Client } from "./api.js";
import { Store } from "./store.js";
import { mount } from "./ui.js";

const api = new URL(window.location.href).searchParams.get("api") ?? "";
const store = new Store(new Client(api));
const root = document.getElementById("app");
if (!root) throw new Error("missing #app mount point");
mount(root, store);
