"""GitHub-shaped API mock for ForgeClient tests.

Builds an httpx.MockTransport handler from plain scenario data and
implements the same page/per_page pagination contract as the real API.
"""

from __future__ import annotations

import json
from urllib.parse import parse_qs, urlparse

import httpx


class MockForgeApi:
    def __init__(self, repo: str, *, stars=0, watchers=0, forks=0,
                 default_branch="main", pulls=(), commits=(), issues=(),
                 workflows=(), dependabot=False):
        self.repo = repo
        self.repo_info = {
            "full_name": repo,
            "stargazers_count": stars,
            "subscribers_count": watchers,
            "forks_count": forks,
            "default_branch": default_branch,
        }
        self.pulls = list(pulls)
        self.commits = list(commits)
        self.issues = list(issues)
        self.workflows = dict(workflows)  # path -> text
        self.dependabot = dependabot
        self.requests: list[str] = []

    def handler(self, request: httpx.Request) -> httpx.Response:
        url = urlparse(str(request.url))
        self.requests.append(url.path + ("?" + url.query if url.query else ""))
        params = {k: v[0] for k, v in parse_qs(url.query).items()}
        return self._route(url.path, params)

    def transport(self) -> httpx.MockTransport:
        return httpx.MockTransport(self.handler)

    def _page(self, items: list, params: dict) -> httpx.Response:
        per_page = int(params.get("per_page", 30))
        page = int(params.get("page", 1))
        start = (page - 1) * per_page
        return httpx.Response(200, json=items[start:start + per_page])

    def _route(self, path: str, params: dict) -> httpx.Response:
        base = f"/repos/{self.repo}"
        if path == base:
            return httpx.Response(200, json=self.repo_info)
        if path == f"{base}/pulls":
            ordered = sorted(self.pulls, key=lambda p: p["created_at"], reverse=True)
            return self._page([self._pull_item(p) for p in ordered], params)
        if path.startswith(f"{base}/pulls/"):
            rest = path[len(base) + len("/pulls/"):]
            if rest.isdigit():
                pull = self._find_pull(int(rest))
                if pull is None:
                    return httpx.Response(404, json={"message": "Not Found"})
                return httpx.Response(200, json=self._pull_detail(pull))
            number, _, collection = rest.partition("/")
            pull = self._find_pull(int(number))
            if pull is None:
                return httpx.Response(404, json={"message": "Not Found"})
            if collection == "reviews":
                return self._page(pull.get("reviews", []), params)
            if collection == "files":
                return self._page(pull.get("files", []), params)
        if path.startswith(f"{base}/issues/") and path.endswith("/comments"):
            number = int(path.split("/")[-2])
            pull = self._find_pull(number)
            if pull is not None:
                return self._page(pull.get("comments", []), params)
            issue = next((i for i in self.issues if i["number"] == number), None)
            if issue is not None:
                return self._page(issue.get("comments", []), params)
            return httpx.Response(404, json={"message": "Not Found"})
        if path == f"{base}/commits":
            return self._page(self.commits, params)
        if path == f"{base}/issues":
            return self._page(self.issues and [
                {k: v for k, v in issue.items() if k != "comments"}
                for issue in self.issues] or [], params)
        if path == f"{base}/contents/.github/workflows":
            if not self.workflows:
                return httpx.Response(404, json={"message": "Not Found"})
            return httpx.Response(200, json=[
                {"type": "file", "path": p, "name": p.rsplit("/", 1)[-1]}
                for p in sorted(self.workflows)])
        if path.startswith(f"{base}/contents/"):
            rel = path[len(f"{base}/contents/"):]
            if rel in ("dependabot.yml", ".github/dependabot.yml"):
                if self.dependabot:
                    return httpx.Response(200, json={"content": "", "encoding": "none"})
                return httpx.Response(404, json={"message": "Not Found"})
            if rel == ".github/dependabot.yaml":
                return httpx.Response(404, json={"message": "Not Found"})
            if rel in self.workflows:
                import base64
                encoded = base64.b64encode(self.workflows[rel].encode()).decode()
                return httpx.Response(200, json={"content": encoded, "encoding": "base64"})
            return httpx.Response(404, json={"message": "Not Found"})
        return httpx.Response(404, json={"message": f"no route for {path}"})

    def _find_pull(self, number: int):
        return next((p for p in self.pulls if p["number"] == number), None)

    def _pull_item(self, pull: dict) -> dict:
        return {
            "number": pull["number"],
            "user": {"login": pull["author"]},
            "title": pull.get("title", ""),
            "created_at": pull["created_at"],
            "merged_at": pull.get("merged_at"),
            "merge_commit_sha": pull.get("merge_commit_sha"),
            "head": {"sha": pull.get("head_sha", f"head{pull['number']}")},
        }

    def _pull_detail(self, pull: dict) -> dict:
        detail = self._pull_item(pull)
        detail.update({
            "body": pull.get("body", ""),
            "comments": len(pull.get("comments", [])),
            "review_comments": 0,
        })
        if pull.get("merged_by"):
            detail["merged_by"] = {"login": pull["merged_by"]}
        return detail


def make_pull(number, author, created_at, *, title="change", body="",
              merged_at=None, merged_by=None, merge_commit_sha=None,
              reviews=(), files=(), comments=()):
    return {
        "number": number,
        "author": author,
        "title": title,
        "body": body,
        "created_at": created_at,
        "merged_at": merged_at,
        "merged_by": merged_by,
        "merge_commit_sha": merge_commit_sha,
        "reviews": [
            {"user": {"login": r[0]}, "state": r[1], "submitted_at": r[2]}
            for r in reviews
        ],
        "files": [
            {"filename": f[0], "additions": f[1], "deletions": f[2],
             **({} if f[3] else {"patch": "@@ -1 +1 @@"})}
            for f in files
        ],
        "comments": [{"user": {"login": c}} for c in comments],
    }


def make_commit(sha, author, date, message="work"):
    return {
        "sha": sha,
        "author": {"login": author} if author else None,
        "commit": {"author": {"name": author or "ghost", "date": date},
                   "committer": {"date": date}, "message": message},
    }


def make_issue(number, author, participants=()):
    return {
        "number": number,
        "user": {"login": author},
        "comments": [{"user": {"login": p}} for p in participants],
    }
