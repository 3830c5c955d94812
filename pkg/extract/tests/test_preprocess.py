"""Text normalization rules, one by one and composed."""

import pytest

from embed_extract.preprocess import preprocess


@pytest.mark.parametrize(
    "raw,expected",
    [
        ("Habari! \U0001F600 https://x.co/ab", "habari"),
        ("ALREADY lower", "already lower"),
        ("", ""),
        ("   ", ""),
        ("just-text, with. punctuation!", "justtext with punctuation"),
        ("link www.example.com trailing", "link trailing"),
        ("https://only.a/link", ""),
        ("\U0001F680\U0001F1F0\U0001F1EA", ""),  # rocket + flag sequence
        ("keep  spaces   tidy", "keep spaces tidy"),
        ("@user said #hashtag", "user said hashtag"),
        ("emoji inside‍ sequence ❤️ ok", "emoji inside sequence ok"),
    ],
)
def test_preprocess_cases(raw, expected):
    assert preprocess(raw) == expected


def test_lowercasing_happens_before_url_matching():
    assert preprocess("HTTPS://LOUD.example/path word") == "word"


def test_numbers_and_unicode_letters_survive():
    assert preprocess("Umwaka wa 2023 n'ibindi") == "umwaka wa 2023 nibindi"
