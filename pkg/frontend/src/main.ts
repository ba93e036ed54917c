import { setApiBase } from './api.js';
import { renderApp } from './app.js';

// point at a non-same-origin backend with ?api=http://127.0.0.1:8800
const override = new URLSearchParams(window.location.search).get('api');
if (override) {
  setApiBase(override);
}

renderApp(document.getElementById('app')!);
