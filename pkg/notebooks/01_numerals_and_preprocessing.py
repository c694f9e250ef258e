"""
Number words and the preprocessing pipeline
===========================================

Spelled-out numbers are the entities, so they have to survive cleaning,
stopword removal and stemming as whole phrases.
"""

# %%
from mathrel.numeral import extract_number_phrases, parse_number_phrase, render_number_words
from mathrel.preprocess import clean_text, preprocess_pipeline

for n in (0, 13, 105, 5040, 2_000_000, 999_999_999):
    words = render_number_words(n)
    print(f"{n:>11,}  {' '.join(words)}  -> {parse_number_phrase(words)}")

# %%
# extraction is greedy: the longest run that parses wins
text = "The factorial value of seven is five thousand and forty."
for p in extract_number_phrases(clean_text(text)):
    print(p)

# %%
# each stage of the pipeline on a few sentences
for text in [
    "A man bought ten mangoes and divided them equally among five children, so each got two.",
    "Eighteen players joined eighteen more, a total of thirty-six players.",
    "The square root of four is two.",
]:
    ts = preprocess_pipeline(text)
    print(text)
    print("  cleaned:", clean_text(text))
    print("  tokens: ", " ".join(ts.tokens))
    # spans point back into the raw text, used later to tint the words
    print("  source: ", [text[a:b] for a, b in ts.spans])
