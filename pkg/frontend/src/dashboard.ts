import { LESION_COLORS, type AgreementReport, type Lesion } from "./types.js";

const VERDICT_CLASSES: Record<string, string> = {
  keep: "badge-keep",
  discard: "badge-discard",
  insufficient: "badge-insufficient",
};

function fmt(v: number): string {
  return v.toFixed(2);
}

function escapeHtml(s: string): string {
  return s.replace(/[&<>"]/g, (ch) => ({ "&": "&amp;", "<": "&lt;", ">": "&gt;", '"': "&quot;" })[ch] as string);
}

/**
 * Render the agreement report as an HTML table with a verdict badge.
 * Numbers come verbatim from the service JSON; rows flagged degenerate
 * carry a marker, and the verdict badge is red on discard.
 */
export function renderDashboard(report: AgreementReport): string {
  const rows = report.rows
    .map((row) => {
      const swatch = `<span class="swatch" style="background:${LESION_COLORS[row.lesion as Lesion]}"></span>`;
      const flag = row.degenerate ? ' <span class="degenerate" title="degenerate pair">&#9888;</span>' : "";
      return (
        `<tr><td>${swatch}${row.lesion}${flag}</td>` +
        `<td>${fmt(row.kappa)}</td><td>${fmt(row.w_kappa)}</td>` +
        `<td>${fmt(row.dsc)}</td><td>${fmt(row.w_dsc)}</td></tr>`
      );
    })
    .join("");
  const avg = "kappa" in report.average
    ? `<tr class="average"><td>Average</td>` +
      `<td>${fmt(report.average.kappa)}</td><td>${fmt(report.average.w_kappa)}</td>` +
      `<td>${fmt(report.average.dsc)}</td><td>${fmt(report.average.w_dsc)}</td></tr>`
    : "";
  const discarded = report.discarded_annotators.length
    ? `<p class="discarded">Discarded annotators: ${report.discarded_annotators.map(escapeHtml).join(", ")}</p>`
    : "";
  const badge = `<span class="badge ${VERDICT_CLASSES[report.verdict] ?? ""}">${report.verdict}</span>`;
  return (
    `<div class="agreement-dashboard">` +
    `<h3>Agreement &mdash; ${escapeHtml(report.image_id)} ${badge}</h3>` +
    `<table><thead><tr><th>Lesion</th><th>Cohen Kappa</th><th>W Cohen Kappa</th>` +
    `<th>DSC</th><th>Weighted DSC</th></tr></thead>` +
    `<tbody>${rows}${avg}</tbody></table>${discarded}</div>`
  );
}

/** Numeric cells exactly as rendered, for tests and exports. */
export function dashboardModel(report: AgreementReport): {
  rows: { lesion: string; cells: number[]; degenerate: boolean }[];
  average: number[] | null;
  verdict: string;
} {
  return {
    rows: report.rows.map((row) => ({
      lesion: row.lesion,
      cells: [row.kappa, row.w_kappa, row.dsc, row.w_dsc],
      degenerate: row.degenerate,
    })),
    average:
      "kappa" in report.average
        ? [report.average.kappa, report.average.w_kappa, report.average.dsc, report.average.w_dsc]
        : null,
    verdict: report.verdict,
  };
}
