"""
Générateurs synthétiques multi-domaines (graine -> sortie identique bit à bit)

Trois archétypes :
- multiview_manifold : arcs entrelacés par classe vus par plusieurs capteurs
  (identité, rotation + échelle, plongement non linéaire en 4-D)
- shadow_attenuation : spectres éclairés et les mêmes spectres atténués par bande
- colocated_ties : deux acquisitions de bandes différentes partageant des objets
  liés ; les étiquettes cibles sont cachées
"""

from dataclasses import dataclass, field

import numpy as np

from core.errors import BadSpec
from models.config import SynthSpec
from models.dataset import NO_TIE, UNLABELED, DomainDataset, MultiDomainCollection
from utils.logging_config import get_logger

logger = get_logger("manialign.synth")

ARCHETYPE_ALIASES = {
    "multiview": "multiview_manifold",
    "shadow": "shadow_attenuation",
    "ties": "colocated_ties",
}

SOURCE_TIE_BANDS = ("R", "G", "B")
TARGET_TIE_BANDS = ("NIR", "R", "G")
CLASS_SPREAD = 0.05
OBJECT_SPREAD = 0.02


@dataclass(frozen=True)
class SyntheticDataset:
    collection: MultiDomainCollection
    hidden_labels: dict[int, np.ndarray] = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)


def class_counts(n: int, priors: list[float]) -> np.ndarray:
    """Effectifs par classe ; le reste de l'arrondi va aux premières classes par reste décroissant."""
    raw = np.asarray(priors, dtype=np.float64) * n
    counts = np.floor(raw).astype(np.int64)
    remainder = n - int(counts.sum())
    order = np.argsort(-(raw - counts), kind="stable")
    counts[order[:remainder]] += 1
    return counts


def _class_labels(spec: SynthSpec, n: int) -> np.ndarray:
    counts = class_counts(n, spec.priors())
    return np.repeat(np.arange(spec.classes), counts)


def _rotation(degrees: float) -> np.ndarray:
    theta = np.deg2rad(degrees)
    return np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])


def _lift(points: np.ndarray) -> np.ndarray:
    x, y = points[:, 0], points[:, 1]
    return np.column_stack([x, y, np.sin(x), np.cos(y)])


def gen_multiview(spec: SynthSpec) -> MultiDomainCollection:
    """
    Arcs de rayon 1 centrés en (2.5c, 0), alternativement vers le haut et vers le bas.

    Domaine 0 : identité ; domaines impairs : rotation (rotation_deg·(m+1)/2) et
    échelle ; domaines pairs >= 2 : plongement [u, y, sin u, cos y] de la vue miroir
    u = -x, si bien que les bandes communes b1, b2 ne se superposent pas sans alignement.
    warp ajoute une distorsion non linéaire aux domaines m >= 1.
    """
    if spec.num_domains < 2:
        raise BadSpec("synth", f"multiview needs at least 2 domains, got {spec.num_domains}")
    rng = np.random.default_rng(spec.seed)
    labels = _class_labels(spec, spec.samples_per_domain)
    angles = rng.uniform(0.0, np.pi, size=labels.size)
    side = np.where(labels % 2 == 0, 1.0, -1.0)
    base = np.column_stack([2.5 * labels + np.cos(angles), side * np.sin(angles)])

    domains = []
    for m in range(spec.num_domains):
        if m == 0:
            features, tags = base.copy(), ("b1", "b2")
        elif m % 2 == 1:
            turn = _rotation(spec.rotation_deg * (m + 1) / 2)
            features, tags = spec.scale * base @ turn.T, ("b1", "b2")
        else:
            features, tags = _lift(base * np.array([-1.0, 1.0])), ("b1", "b2", "b3", "b4")
        if m >= 1 and spec.warp > 0:
            features = features + spec.warp * np.sin(features[:, ::-1])
        features = features + spec.noise * rng.standard_normal(features.shape)
        domains.append(DomainDataset(features, labels, domain_id=m, band_tags=tags, name=f"domain{m + 1}"))

    logger.debug(f"gen_multiview M={spec.num_domains} n={labels.size} classes={spec.classes}")
    return MultiDomainCollection(tuple(domains))


def _spectral_signatures(classes: int, bands: int, rng: np.random.Generator) -> np.ndarray:
    # formes spectrales distinctes par classe, valeurs dans [0.1, 0.7]
    b = np.arange(1, bands + 1)
    shapes = np.array([np.sin(np.pi * b * (c + 1) / (bands + 1)) for c in range(classes)])
    jitter = rng.uniform(-0.05, 0.05, size=(classes, bands))
    return np.clip(0.4 + 0.25 * shapes + jitter, 0.1, 0.7)


def gen_shadow(spec: SynthSpec) -> MultiDomainCollection:
    """
    Domaine 0 : spectres éclairés (gaussiennes par classe, bandes positives).
    Domaine 1 : mêmes échantillons atténués par bande, plus bruit additif.

    Sans gamma, le facteur de la bande b vaut attenuation^e_b pour tous les pixels
    (e_b = 1 + attenuation_spread·t_b, t_b de -1 à 1). Avec gamma, chaque pixel reçoit
    sa propre profondeur d'ombre a dans [attenuation, 1] et la bande b est atténuée
    par a^e_b avant la réponse x^γ du capteur : chaque classe devient une courbe
    que ni une application linéaire ni une correspondance bande par bande ne redresse.
    """
    if not 0 < spec.attenuation <= 1:
        raise BadSpec("synth", f"attenuation must lie in (0, 1], got {spec.attenuation}")
    rng = np.random.default_rng(spec.seed)
    labels = _class_labels(spec, spec.samples_per_domain)
    signatures = _spectral_signatures(spec.classes, spec.bands, rng)
    lit = signatures[labels] + CLASS_SPREAD * rng.standard_normal((labels.size, spec.bands))
    lit = np.clip(lit, 1e-3, None)
    lit_noise = spec.noise * rng.standard_normal(lit.shape)

    exponents = 1.0 + spec.attenuation_spread * np.linspace(-1.0, 1.0, spec.bands)
    if spec.gamma is None:
        # facteurs dans (0, 1], tous égaux à 1 quand attenuation = 1
        shadowed = lit * spec.attenuation ** exponents
    else:
        depth = spec.attenuation ** rng.uniform(0.0, 1.0, size=(labels.size, 1))
        shadowed = (lit * depth ** exponents) ** spec.gamma
    shadowed = shadowed + spec.noise * rng.standard_normal(shadowed.shape)
    lit = lit + lit_noise

    tags = tuple(f"B{b + 1}" for b in range(spec.bands))
    return MultiDomainCollection((
        DomainDataset(lit, labels, domain_id=0, band_tags=tags, name="illuminated"),
        DomainDataset(shadowed, labels, domain_id=1, band_tags=tags, name="shadowed"),
    ))


def gen_ties(spec: SynthSpec) -> SyntheticDataset:
    """
    Source (R, G, B) étiquetée, cible (NIR, R, G) sans étiquettes.

    L'objet o appartient à la classe o mod classes ; sa taille dans chaque domaine
    est tirée dans object_size. Les pixels hors objets complètent chaque domaine
    jusqu'à samples_per_domain.
    """
    if spec.num_objects < spec.classes:
        raise BadSpec("synth", f"{spec.num_objects} tie objects for {spec.classes} classes")
    rng = np.random.default_rng(spec.seed)
    # réflectances [B, G, R, NIR]
    signatures = _spectral_signatures(spec.classes, 4, rng)
    object_class = np.arange(spec.num_objects) % spec.classes
    object_offset = OBJECT_SPREAD * rng.standard_normal((spec.num_objects, 4))
    low, high = spec.object_size

    def acquire(reflectance: np.ndarray, source: bool) -> np.ndarray:
        if source:
            return reflectance[:, [2, 1, 0]]
        gains = np.array([1.2, 0.8, 0.9])
        return gains * reflectance[:, [3, 2, 1]] ** 0.8 + 0.05

    domains, hidden, sizes = [], {}, {}
    for m, source in ((0, True), (1, False)):
        counts = rng.integers(low, high + 1, size=spec.num_objects)
        sizes[m] = counts.tolist()
        tie_ids = np.repeat(np.arange(spec.num_objects), counts)
        tie_labels = object_class[tie_ids]
        tie_refl = signatures[tie_labels] + object_offset[tie_ids]

        background = max(spec.samples_per_domain - tie_ids.size, 0)
        bg_labels = _class_labels(spec, background)
        bg_refl = signatures[bg_labels] + OBJECT_SPREAD * rng.standard_normal((background, 4))

        reflectance = np.vstack([tie_refl, bg_refl])
        reflectance = np.clip(reflectance + spec.noise * rng.standard_normal(reflectance.shape), 1e-3, None)
        labels = np.concatenate([tie_labels, bg_labels])
        ties = np.concatenate([tie_ids, np.full(background, NO_TIE)])
        features = acquire(reflectance, source)
        if source:
            domains.append(DomainDataset(features, labels, ties, 0, SOURCE_TIE_BANDS, "source"))
        else:
            hidden[m] = labels
            domains.append(DomainDataset(features, np.full(labels.size, UNLABELED), ties, 1, TARGET_TIE_BANDS, "target"))

    collection = MultiDomainCollection(tuple(domains), tuple(range(spec.classes)))
    metadata = {"num_objects": spec.num_objects, "object_sizes": sizes}
    logger.debug(f"gen_ties objects={spec.num_objects} sizes={collection.sizes}")
    return SyntheticDataset(collection, hidden, metadata)


def generate(spec: SynthSpec) -> SyntheticDataset:
    """Aiguille vers le générateur de l'archétype ; renvoie toujours un SyntheticDataset."""
    if spec.archetype == "colocated_ties":
        dataset = gen_ties(spec)
    elif spec.archetype == "shadow_attenuation":
        dataset = SyntheticDataset(gen_shadow(spec))
    elif spec.archetype == "multiview_manifold":
        dataset = SyntheticDataset(gen_multiview(spec))
    else:
        raise BadSpec("synth", f"unknown archetype '{spec.archetype}'")
    metadata = {"archetype": spec.archetype, "seed": spec.seed, "classes": spec.classes, **dataset.metadata}
    logger.info(f"Generated {spec.archetype}: {dataset.collection.M} domains, sizes {dataset.collection.sizes}")
    return SyntheticDataset(dataset.collection, dataset.hidden_labels, metadata)
