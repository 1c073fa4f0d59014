"""Synthetic long-tail normalization benchmark.

Builds a two-level ontology of invented symptom-like concepts plus one
or more mention datasets over it, so the whole train/evaluate loop can
run hermetically with a known label distribution.

Concept names are "adjective noun" word pairs. Child terms per concept
are the name itself plus lexical variants (prefixed qualifier phrase,
reversed word order, word replaced by a synonym). Mentions are sampled
with a Zipf distribution over a per-dataset random permutation of the
concepts, so every dataset has a long tail and different datasets
emphasize different concepts; each mention starts from a random child
term of its concept and is corrupted by a per-dataset noise style:

  - paraphrase_rate: per word, probability of replacement by a synonym
    (when the word has one); also, once per text, the probability of
    inserting a colloquial filler at a random position.
  - typo_rate: per word, probability of one character edit (swap of an
    adjacent pair, or deletion when the word is long enough).

Samples carry their source child term id, so generated datasets exercise
the term-labeled loading path end to end.
"""

from __future__ import annotations

from dataclasses import dataclass

from .data import Dataset, Sample
from .ontology import Concept, LltEntry, Ontology
from .rng import SplitMix64
from .validation import check_positive, check_seed, check_unit_interval

ADJECTIVES = (
    "aching", "burning", "chronic", "dull", "intermittent", "severe",
    "mild", "sharp", "sudden", "persistent", "throbbing", "acute",
    "recurrent", "localized", "diffuse", "stabbing", "tingling",
    "numbing", "swollen", "itchy", "tender", "stiff", "cramping",
    "radiating", "shooting", "pulsing", "gnawing", "searing", "nagging",
    "fleeting",
)

NOUNS = (
    "headache", "rash", "cough", "fever", "nausea", "fatigue",
    "dizziness", "cramp", "tremor", "chill", "sweat", "insomnia",
    "anxiety", "palpitation", "bruise", "blister", "swelling",
    "stiffness", "weakness", "numbness", "itch", "spasm", "ache",
    "soreness", "tightness", "pressure", "discomfort", "irritation",
    "inflammation", "congestion", "drowsiness", "restlessness",
    "tenderness", "twitching",
)

# Word -> replacement used both for child-term variants and paraphrase
# noise. Replacements deliberately avoid the two tables above so a
# paraphrase never turns one concept name into another.
SYNONYMS = {
    "aching": "sore", "burning": "scalding", "chronic": "longstanding",
    "dull": "faint", "intermittent": "on and off", "severe": "intense",
    "mild": "slight", "sharp": "piercing", "sudden": "abrupt",
    "persistent": "constant", "throbbing": "pounding", "acute": "serious",
    "recurrent": "returning", "localized": "focal", "diffuse": "widespread",
    "stabbing": "knifelike", "tingling": "pins and needles",
    "numbing": "deadening", "swollen": "puffy", "itchy": "scratchy",
    "tender": "delicate", "stiff": "rigid", "cramping": "seizing",
    "radiating": "spreading", "shooting": "darting", "pulsing": "rhythmic",
    "gnawing": "grinding", "searing": "blazing", "nagging": "lingering",
    "fleeting": "brief",
    "headache": "head pain", "rash": "skin eruption", "cough": "hacking",
    "fever": "high temperature", "nausea": "queasiness",
    "fatigue": "exhaustion", "dizziness": "lightheadedness",
    "cramp": "knotting", "tremor": "shaking", "chill": "shivering",
    "sweat": "perspiration", "insomnia": "sleeplessness",
    "anxiety": "nervousness", "palpitation": "racing heart",
    "bruise": "contusion", "blister": "vesicle", "swelling": "puffiness",
    "stiffness": "rigidity", "weakness": "feebleness",
    "numbness": "loss of feeling", "itch": "prickle", "spasm": "jerking",
    "ache": "hurting", "soreness": "rawness", "tightness": "constriction",
    "pressure": "squeezing", "discomfort": "unease",
    "irritation": "chafing", "inflammation": "flare",
    "congestion": "stuffiness", "drowsiness": "sleepiness",
    "restlessness": "fidgeting", "tenderness": "sensitivity",
    "twitching": "fluttering",
}

AFFIXES = (
    "worsening", "ongoing", "occasional", "noticeable", "unusual",
    "troubling", "waves of", "episodes of",
)

FILLERS = (
    "my", "some", "a bit of", "like", "sort of", "been having",
    "lots of", "kinda",
)


@dataclass(frozen=True)
class NoiseStyle:
    typo_rate: float
    paraphrase_rate: float

    def validate(self) -> "NoiseStyle":
        check_unit_interval(self.typo_rate, "typo_rate")
        check_unit_interval(self.paraphrase_rate, "paraphrase_rate")
        return self


DEFAULT_STYLES = (
    NoiseStyle(typo_rate=0.05, paraphrase_rate=0.35),
    NoiseStyle(typo_rate=0.25, paraphrase_rate=0.05),
)


@dataclass(frozen=True)
class SynthConfig:
    n_pt: int = 200
    children_min: int = 2
    children_max: int = 6
    n_hlt: int = 20
    n_samples: int = 2000
    zipf_exponent: float = 1.1
    styles: tuple = DEFAULT_STYLES
    seed: int = 0

    def validate(self) -> "SynthConfig":
        if self.n_pt < 2:
            raise ValueError(f"n_pt must be >= 2, got {self.n_pt}")
        capacity = len(ADJECTIVES) * len(NOUNS)
        if self.n_pt > capacity:
            raise ValueError(f"n_pt must be <= {capacity} "
                             f"(distinct name limit), got {self.n_pt}")
        if not (1 <= self.children_min <= self.children_max):
            raise ValueError(
                f"need 1 <= children_min <= children_max, got "
                f"({self.children_min}, {self.children_max})")
        if self.n_hlt < 0:
            raise ValueError(f"n_hlt must be >= 0, got {self.n_hlt}")
        if self.n_samples < 0:
            raise ValueError(f"n_samples must be >= 0, "
                             f"got {self.n_samples}")
        check_positive(self.zipf_exponent, "zipf_exponent")
        if not self.styles:
            raise ValueError("need at least one noise style")
        for s in self.styles:
            s.validate()
        check_seed(self.seed)
        return self


def _variant(name_words, rng: SplitMix64) -> str:
    kind = rng.randrange(3)
    if kind == 0:
        return f"{rng.choice(AFFIXES)} {' '.join(name_words)}"
    if kind == 1:
        return " ".join(reversed(name_words))
    # synonym substitution on a random eligible word; fall back to an
    # affix when the name has no replaceable word
    eligible = [i for i, w in enumerate(name_words) if w in SYNONYMS]
    if not eligible:
        return f"{rng.choice(AFFIXES)} {' '.join(name_words)}"
    i = rng.choice(eligible)
    replaced = list(name_words)
    replaced[i] = SYNONYMS[replaced[i]]
    return " ".join(replaced)


def _typo(word: str, rng: SplitMix64) -> str:
    if len(word) < 2:
        return word
    can_delete = len(word) >= 4
    op = rng.randrange(2) if can_delete else 0
    if op == 0:
        pos = rng.randrange(len(word) - 1)
        return word[:pos] + word[pos + 1] + word[pos] + word[pos + 2:]
    pos = rng.randrange(len(word))
    return word[:pos] + word[pos + 1:]


def apply_noise(text: str, style: NoiseStyle, rng: SplitMix64) -> str:
    words = text.split()
    paraphrased = []
    for w in words:
        if w in SYNONYMS and rng.uniform() < style.paraphrase_rate:
            paraphrased.extend(SYNONYMS[w].split())
        else:
            paraphrased.append(w)
    if rng.uniform() < style.paraphrase_rate:
        slot = rng.randrange(len(paraphrased) + 1)
        filler = rng.choice(FILLERS).split()
        paraphrased = paraphrased[:slot] + filler + paraphrased[slot:]
    noised = []
    for w in paraphrased:
        if rng.uniform() < style.typo_rate:
            noised.append(_typo(w, rng))
        else:
            noised.append(w)
    return " ".join(noised)


def _zipf_cumulative(n: int, exponent: float):
    weights = [(r + 1) ** (-exponent) for r in range(n)]
    total = sum(weights)
    acc = 0.0
    cumulative = []
    for w in weights:
        acc += w
        cumulative.append(acc / total)
    cumulative[-1] = 1.0
    return cumulative


def _draw_rank(cumulative, rng: SplitMix64) -> int:
    u = rng.uniform()
    lo, hi = 0, len(cumulative) - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if u < cumulative[mid]:
            hi = mid
        else:
            lo = mid + 1
    return lo


def gen_synthetic(config: SynthConfig):
    """Build (ontology, datasets) for a config; pure in the seed.

    One dataset per noise style, named synth-a, synth-b, ... Every
    dataset draws from the same ontology but with its own concept-rank
    permutation, so the head concepts differ between datasets.
    """
    config.validate()
    root = SplitMix64(check_seed(config.seed))
    rng_names = root.spawn("names")
    rng_tree = root.spawn("tree")

    combos = [(a, n) for a in ADJECTIVES for n in NOUNS]
    combos.sort()
    rng_names.shuffle(combos)
    chosen = combos[:config.n_pt]

    concepts = []
    llts = []
    for p, (adj, noun) in enumerate(chosen):
        pt_id = f"P{p:04d}"
        name = f"{adj} {noun}"
        if config.n_hlt > 0:
            g = rng_tree.randrange(config.n_hlt)
            hlt_id, hlt_text = f"H{g:03d}", f"group {g:02d} conditions"
        else:
            hlt_id = hlt_text = None
        concepts.append(Concept(pt_id, name, hlt_id, hlt_text))
        n_children = config.children_min + rng_tree.randrange(
            config.children_max - config.children_min + 1)
        texts = [name]
        attempts = 0
        while len(texts) < n_children and attempts < 8 * n_children:
            candidate = _variant((adj, noun), rng_tree)
            attempts += 1
            if candidate not in texts:
                texts.append(candidate)
        for c, llt_text in enumerate(texts):
            llts.append(LltEntry(f"L{p:04d}{c:02d}", llt_text, pt_id))
    ontology = Ontology(concepts, llts,
                        version_tag=f"synth-seed{config.seed}")

    cumulative = _zipf_cumulative(config.n_pt, config.zipf_exponent)
    pt_ids = [c.pt_id for c in concepts]
    datasets = []
    for d, style in enumerate(config.styles):
        name = f"synth-{chr(ord('a') + d)}" if d < 26 else f"synth-{d}"
        rng_ds = root.spawn(f"dataset:{d}")
        ranked = list(pt_ids)
        rng_ds.shuffle(ranked)
        samples = []
        for j in range(config.n_samples):
            pt_id = ranked[_draw_rank(cumulative, rng_ds)]
            entry = rng_ds.choice(ontology.children_of(pt_id))
            text = apply_noise(entry.llt_text, style, rng_ds)
            samples.append(Sample(
                sample_id=f"{name}-{j:05d}", text=text,
                label_pt_id=pt_id, source_llt_id=entry.llt_id))
        datasets.append(Dataset(name=name, samples=tuple(samples)))
    return ontology, datasets
