"""Community-quality raw metrics from a repository snapshot.

Covers the fifteen sub-metrics: popularity counts and participation
averages, review-strength ratios and the approve-count distribution,
and the privilege-barrier signals derived from behavioral role
inference (who merges, who approves, and how many PRs each needed
before their first privileged action).
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime

from hsbr.errors import SemanticUnavailableError
from hsbr.forge import PullRequestRecord, RepositorySnapshot
from hsbr.model import Histogram, MetricId, RawValue
from hsbr.semantic import SemanticBackend, SemanticTask, SemanticTaskKind, assess


@dataclass(frozen=True)
class RoleAssignment:
    """Privileged users inferred from observable events.

    Maintainers merged at least one PR or pushed a direct commit;
    approvers submitted at least one approving review. The promotion
    maps carry each user's earliest privileged action.
    """

    maintainers: frozenset[str]
    approvers: frozenset[str]
    maintainer_promotions: dict[str, datetime]
    approver_promotions: dict[str, datetime]


def infer_roles(snapshot: RepositorySnapshot) -> RoleAssignment:
    """Derive roles from merges, direct commits and approving reviews.

    Equal-timestamp events are ordered by PR number (direct commits
    after PRs, by sha), so inference does not depend on input order.
    """
    maintainer_events: list[tuple[datetime, tuple, str]] = []
    approver_events: list[tuple[datetime, tuple, str]] = []
    for pr in snapshot.pull_requests:
        if pr.merged and pr.merged_by:
            maintainer_events.append((pr.merged_at, (0, pr.number), pr.merged_by))
        for review in pr.reviews:
            if review.state == "approved" and review.reviewer:
                approver_events.append((review.timestamp, (0, pr.number), review.reviewer))
    for commit in snapshot.commits_default_branch:
        if commit.is_direct and commit.author:
            maintainer_events.append((commit.committed_at, (1, commit.sha), commit.author))

    def first_actions(events):
        promotions: dict[str, datetime] = {}
        for timestamp, _, user in sorted(events, key=lambda e: (e[0], e[1])):
            promotions.setdefault(user, timestamp)
        return promotions

    maintainer_promotions = first_actions(maintainer_events)
    approver_promotions = first_actions(approver_events)
    return RoleAssignment(
        maintainers=frozenset(maintainer_promotions),
        approvers=frozenset(approver_promotions),
        maintainer_promotions=maintainer_promotions,
        approver_promotions=approver_promotions,
    )


def prs_before_promotion(
    snapshot: RepositorySnapshot, roles: RoleAssignment, role: str
) -> Histogram:
    """Distribution of PRs authored before each user's promotion.

    ``role`` is ``maintainer`` or ``approver``. Users with no prior PRs
    land in bin 0; no promoted users at all yields an empty histogram.
    """
    promotions = (roles.maintainer_promotions if role == "maintainer"
                  else roles.approver_promotions)
    bins: dict[int, int] = {}
    for user, promoted_at in promotions.items():
        count = sum(
            1 for pr in snapshot.pull_requests
            if pr.author == user and pr.created_at < promoted_at
        )
        bins[count] = bins.get(count, 0) + 1
    return Histogram.from_dict(bins)


def histogram_expectation(d: Histogram) -> float:
    """Frequency-weighted mean; raises UndefinedExpectationError when
    the histogram has no mass (callers substitute the worst score)."""
    return d.expectation()


@dataclass(frozen=True)
class CQRawValues:
    """The fifteen community-quality raw values plus evaluation notes."""

    stargazers: int
    watchers: int
    forks: int
    active_users: int
    avg_issue_participants: float
    avg_pr_participants: float
    direct_commit_ratio: float
    direct_commit_users: int
    required_approves: Histogram
    undiscussed_merge_ratio: float
    inconsistent_pr_ratio: float
    maintainer_count: int
    approver_count: int
    prs_to_maintainer: Histogram
    prs_to_approver: Histogram
    notes: tuple[str, ...] = ()

    def raw_values(self) -> dict[MetricId, RawValue]:
        return {
            MetricId.STARGAZERS: float(self.stargazers),
            MetricId.WATCHERS: float(self.watchers),
            MetricId.FORKS: float(self.forks),
            MetricId.ACTIVE_USERS: float(self.active_users),
            MetricId.AVG_ISSUE_PARTICIPANTS: self.avg_issue_participants,
            MetricId.AVG_PR_PARTICIPANTS: self.avg_pr_participants,
            MetricId.DIRECT_COMMIT_RATIO: self.direct_commit_ratio,
            MetricId.DIRECT_COMMIT_USERS: float(self.direct_commit_users),
            MetricId.REQUIRED_APPROVES_DIST: self.required_approves,
            MetricId.UNDISCUSSED_MERGE_RATIO: self.undiscussed_merge_ratio,
            MetricId.INCONSISTENT_PR_RATIO: self.inconsistent_pr_ratio,
            MetricId.MAINTAINER_COUNT: float(self.maintainer_count),
            MetricId.APPROVER_COUNT: float(self.approver_count),
            MetricId.PRS_TO_MAINTAINER: self.prs_to_maintainer,
            MetricId.PRS_TO_APPROVER: self.prs_to_approver,
        }


def _pr_consistency_task(pr: PullRequestRecord) -> SemanticTask:
    return SemanticTask(
        kind=SemanticTaskKind.PR_CONSISTENCY,
        payload={
            "title": pr.title,
            "body": pr.body,
            "diff_summary": [
                {"path": d.path, "added": d.added, "removed": d.removed,
                 "is_binary": d.is_binary}
                for d in pr.diff_summary
            ],
        },
    )


def _inconsistent_ratio(
    merged: list[PullRequestRecord], semantic: SemanticBackend | None
) -> tuple[float, list[str]]:
    if not merged:
        return 0.0, []
    if semantic is None:
        return 0.0, ["semantic-unavailable: no backend configured; "
                     "inconsistent-pr-ratio defaulted to 0"]
    try:
        flagged = sum(
            1 for pr in merged
            if assess(_pr_consistency_task(pr), semantic).label == "inconsistent"
        )
    except SemanticUnavailableError as exc:
        return 0.0, [f"semantic-unavailable: {exc}; "
                     "inconsistent-pr-ratio defaulted to 0"]
    return flagged / len(merged), []


def community_raw_metrics(
    snapshot: RepositorySnapshot,
    roles: RoleAssignment | None = None,
    semantic: SemanticBackend | None = None,
) -> CQRawValues:
    """Compute all fifteen community-quality raw values.

    Participation averages use merged and unmerged PRs; review ratios
    use merged PRs only. Semantic-backend failures degrade to
    static-only evaluation with a recorded note.
    """
    if roles is None:
        roles = infer_roles(snapshot)

    active: set[str] = set()
    active.update(pr.author for pr in snapshot.pull_requests if pr.author)
    active.update(c.author for c in snapshot.commits_default_branch if c.author)
    for issue in snapshot.issues:
        active.update(p for p in issue.participant_ids if p)

    issues = snapshot.issues
    avg_issue = (sum(len(i.participant_ids) for i in issues) / len(issues)
                 if issues else 0.0)
    prs = snapshot.pull_requests
    avg_pr = (sum(len(pr.participant_ids) for pr in prs) / len(prs)
              if prs else 0.0)

    commits = snapshot.commits_default_branch
    direct = [c for c in commits if c.is_direct]
    direct_ratio = len(direct) / len(commits) if commits else 0.0
    direct_users = {c.author for c in direct if c.author}

    merged = [pr for pr in prs if pr.merged]
    approve_bins: dict[int, int] = {}
    for pr in merged:
        count = pr.approve_count
        approve_bins[count] = approve_bins.get(count, 0) + 1
    undiscussed = sum(
        1 for pr in merged if not pr.reviews and pr.comment_count == 0)
    undiscussed_ratio = undiscussed / len(merged) if merged else 0.0

    inconsistent_ratio, notes = _inconsistent_ratio(merged, semantic)

    return CQRawValues(
        stargazers=snapshot.stats.stargazers,
        watchers=snapshot.stats.watchers,
        forks=snapshot.stats.forks,
        active_users=len(active),
        avg_issue_participants=avg_issue,
        avg_pr_participants=avg_pr,
        direct_commit_ratio=direct_ratio,
        direct_commit_users=len(direct_users),
        required_approves=Histogram.from_dict(approve_bins),
        undiscussed_merge_ratio=undiscussed_ratio,
        inconsistent_pr_ratio=inconsistent_ratio,
        maintainer_count=len(roles.maintainers),
        approver_count=len(roles.approvers),
        prs_to_maintainer=prs_before_promotion(snapshot, roles, "maintainer"),
        prs_to_approver=prs_before_promotion(snapshot, roles, "approver"),
        notes=tuple(notes),
    )
