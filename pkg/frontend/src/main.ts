import { App } from "./app";
import { ServiceClient } from "./api";

const params = new URLSearchParams(window.location.search);
const base = params.get("service") ?? "http://127.0.0.1:8080";
const app = new App(new ServiceClient(base), document.getElementById("app")!);
void app.start();
