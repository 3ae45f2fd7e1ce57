import dataclasses
import random
from urllib.parse import urlsplit, urlunsplit

import pytest

from wpnmine.ingest import (
    CampaignPlan,
    Dataset,
    SyntheticPlan,
    SyntheticResult,
    generate_synthetic,
)
from wpnmine.model import WpnRecord
from wpnmine.psl import PublicSuffixList

_SERIAL = iter(range(1, 10**9))


def make_record(
    id: str | None = None,
    source_url: str = "https://news-site.com/page",
    source_etld1: str = "news-site.com",
    title: str = "hello world",
    body: str = "sample notification body text",
    landing_url: str | None = "https://landing.com/offer/claim.php?uid=1",
    clicked: bool = False,
    platform: str = "desktop",
    sw_script_url: str = "https://news-site.com/sw.js",
    redirect_chain: tuple[str, ...] = (),
    icon_url: str | None = None,
    collected_at: str = "2024-03-01T10:00:00Z",
) -> WpnRecord:
    return WpnRecord(
        id=id if id is not None else f"rec-{next(_SERIAL):06d}",
        source_url=source_url,
        source_etld1=source_etld1,
        sw_script_url=sw_script_url,
        title=title,
        body=body,
        icon_url=icon_url,
        landing_url=landing_url,
        redirect_chain=redirect_chain,
        platform=platform,
        collected_at=collected_at,
        clicked=clicked,
    )


@pytest.fixture
def tiny_psl() -> PublicSuffixList:
    return PublicSuffixList.from_text(
        "\n".join(
            [
                "// test rules",
                "com",
                "net",
                "org",
                "co.uk",
                "*.ck",
                "!www.ck",
            ]
        )
    )


def small_synthetic(seed: int = 1, n_noise: int = 1, n_unclustered: int = 0):
    """Three well-separated campaigns: two multi-source, one single-source."""
    plan = SyntheticPlan(
        campaigns=(
            CampaignPlan(
                name="giveaway",
                title="Congratulations you won",
                body="Claim your free gift card now before the offer expires",
                n_messages=20,
                n_source_domains=6,
                n_landing_domains=2,
                path_template="prize/claim.php",
            ),
            CampaignPlan(
                name="account-alert",
                title="Account alert verify now",
                body="Unusual sign in detected please verify your account today",
                n_messages=10,
                n_source_domains=3,
                n_landing_domains=1,
                path_template="secure/verify.php",
            ),
            CampaignPlan(
                name="newsletter",
                title="Weekly savings inside",
                body="Your weekly deals newsletter has arrived open for coupons",
                n_messages=4,
                n_source_domains=1,
                n_landing_domains=1,
                path_template="news/latest.html",
            ),
        ),
        n_noise=n_noise,
        n_unclustered=n_unclustered,
        seed=seed,
    )
    return generate_synthetic(plan)


def shared_domain_corpus(
    seed: int = 5,
    share: tuple[str, ...] = ("giveaway", "security-alert"),
) -> SyntheticResult:
    """Three campaigns; the ones named in ``share`` land on one domain.

    Marking a shared cluster malicious must make the other shared
    clusters suspicious through the common landing domain; campaigns
    outside ``share`` sit in their own components.
    """
    plan = SyntheticPlan(
        campaigns=(
            CampaignPlan(
                name="giveaway",
                title="Congratulations you won a prize",
                body="Claim your free gift card reward now before the offer expires",
                n_messages=12,
                n_source_domains=3,
                n_landing_domains=1,
                path_template="prize/claim.php",
            ),
            CampaignPlan(
                name="security-alert",
                title="Security warning virus detected",
                body="Your device is infected run the antivirus scan immediately today",
                n_messages=8,
                n_source_domains=2,
                n_landing_domains=1,
                path_template="scan/clean.php",
            ),
            CampaignPlan(
                name="newsletter",
                title="Weekly savings digest inside",
                body="Your weekly deals newsletter has arrived open for fresh coupons",
                n_messages=6,
                n_source_domains=1,
                n_landing_domains=1,
                path_template="news/latest.html",
            ),
        ),
        seed=seed,
    )
    result = generate_synthetic(plan)
    records = []
    for record in result.dataset.records:
        if result.truth[record.id] in share:
            split = urlsplit(record.landing_url)
            record = dataclasses.replace(
                record,
                landing_url=urlunsplit(
                    (split.scheme, "shared-landing.com", split.path, split.query, "")
                ),
            )
        records.append(record)
    dataset = Dataset(tuple(records), result.dataset.provenance)
    return SyntheticResult(dataset=dataset, truth=result.truth)


def random_bag(rng: random.Random, vocab: list[str], max_tokens: int = 12) -> dict[str, int]:
    n = rng.randint(0, max_tokens)
    counts: dict[str, int] = {}
    for _ in range(n):
        token = rng.choice(vocab)
        counts[token] = counts.get(token, 0) + 1
    return counts
