/**
 * Wizard shell: step navigation (forward-gated, back always allowed),
 * error banner, and the active view.
 */

import { store } from './store.js';
import { renderReportView } from './views/report.js';
import { renderThemeView } from './views/themes.js';
import { renderTopicView } from './views/topic.js';

const STEPS: { view: 1 | 2 | 3; title: string }[] = [
  { view: 1, title: 'Topic & source' },
  { view: 2, title: 'Theme' },
  { view: 3, title: 'Report' },
];

export function renderApp(root: HTMLElement): () => void {
  root.innerHTML = `
    <header>
      <h1>pulse</h1>
      <nav id="steps" aria-label="wizard steps"></nav>
    </header>
    <div id="banner" class="banner error" role="alert" hidden></div>
    <main id="view"></main>
  `;
  const nav = root.querySelector<HTMLElement>('#steps')!;
  const banner = root.querySelector<HTMLElement>('#banner')!;
  const view = root.querySelector<HTMLElement>('#view')!;

  const sync = () => {
    const session = store.get();

    nav.innerHTML = '';
    for (const step of STEPS) {
      const button = document.createElement('button');
      button.textContent = `${step.view}. ${step.title}`;
      button.disabled = step.view > session.maxViewReached;
      if (step.view === session.view) {
        button.classList.add('active');
      }
      button.addEventListener('click', () => store.goTo(step.view));
      nav.appendChild(button);
    }

    if (session.error) {
      banner.textContent = session.error;
      banner.hidden = false;
    } else {
      banner.hidden = true;
    }

    view.innerHTML = '';
    const mount = document.createElement('div');
    view.appendChild(mount);
    if (session.view === 1) {
      renderTopicView(mount);
    } else if (session.view === 2) {
      renderThemeView(mount);
    } else {
      renderReportView(mount);
    }
  };

  sync();
  return store.subscribe(sync);
}
