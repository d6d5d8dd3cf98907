"""Score an outline and a section with the LLM-judge harness.

Uses the constant mock judge (always "4") so the run is offline and the
aggregate table is predictable; swap in an HTTP provider to judge with a
real model.

Run:  python demos/demo_eval_harness.py
"""
from __future__ import annotations

from caselawgen.evalsuite import aggregate, eval_content, eval_structure, summary_csv
from caselawgen.outline import parse_toc
from caselawgen.providers import ChatProvider


class ConstantJudge(ChatProvider):
    def chat(self, request):
        return "4"


def main() -> None:
    judge = ConstantJudge()
    outline = parse_toc(
        "Deprivation of liberty\n"
        "    Lawfulness of detention\n"
        "    Review by a court\n"
        "Procedural safeguards"
    )
    reference_toc = "Liberty and security\n    Grounds of detention\n    Speediness of review"

    results = []
    for r in eval_structure("judicial review of detention", outline, judge, reference_toc=reference_toc):
        results.append(("demo-system", r))
        print(f"[structure] {r.dimension}: score={r.score}")

    content = (
        "Detention must be reviewed speedily by a court (001-10001#4). The "
        "review must be adversarial (001-10002#7)."
    )
    cited = [
        "A court must decide speedily on the lawfulness of detention.",
        "The review procedure must be adversarial and ensure equality of arms.",
    ]
    for r in eval_content("Review by a court", content, cited, judge, reference_content="reference text"):
        results.append(("demo-system", r))
        print(f"[content]   {r.dimension}: score={r.score}")

    print("\nsummary table:")
    print(summary_csv(aggregate(results)), end="")


if __name__ == "__main__":
    main()
