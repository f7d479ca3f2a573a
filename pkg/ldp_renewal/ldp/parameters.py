from dataclasses import asdict, dataclass, fields
from typing import ClassVar, Dict

from .exceptions import ConfigError

class _Parameters:
    defaults: ClassVar[Dict] = {}
    name_map: ClassVar[Dict] = {}
    description_map: ClassVar[Dict] = {}

    def __init__(self, params: Dict = None, use_defaults=True, **kwargs):
        if params is None:
            params = {}
        unknown = (set(params) | set(kwargs)) - {f.name for f in fields(self)}
        if unknown:
            raise ConfigError(f"Unknown parameters for {type(self).__name__}: {sorted(unknown)}")

        def kwarg_or_dict_or_default(key):
            d = params.get(key, None)
            if d is not None: return d
            d = kwargs.get(key, None)
            if d is not None: return d
            if use_defaults: return self.defaults[key]
            return None

        for f in fields(self):
            value = kwarg_or_dict_or_default(f.name)
            setattr(self, f.name, value if value is None else f.type(value))
        self.validate()

    def validate(self):
        for k, v in self.items():
            if v <= 0:
                raise ConfigError(f"{self.name_map[k]} ({k}) must be positive, got {v}")

    def values(self):
        return [v for k, v in self.items()]

    def keys(self):
        return [k for k, v in self.items()]

    def items(self):
        return [(k, v) for k, v in asdict(self).items() if v is not None]

    def names(self):
        return [v for k, v in self.name_map.items() if asdict(self)[k] is not None]

    def descriptions(self):
        return [v for k, v in self.description_map.items() if asdict(self)[k] is not None]

    def encode(self):
        return dict(self.items())

    @classmethod
    def decode(cls, serial):
        return cls(serial)

@dataclass(init=False)
class RateParameters(_Parameters):
    trust_radius: float
    outward_slope: float
    gradient_tol: float
    certificate_tol: float
    gamma_rtol: float
    beta_tol: float
    objective_noise: float
    max_newton_iterations: int
    bracket_limit: float
    envelope_rtol: float
    envelope_steps: int
    set_certify_tol: float
    affine_tol: float
    boundary_probe: float

    defaults: ClassVar = {
        "trust_radius":          1e3,
        "outward_slope":         1e-6,
        "gradient_tol":          1e-9,
        "certificate_tol":       1e-5,
        "gamma_rtol":            1e-8,
        "beta_tol":              1e-8,
        "objective_noise":       1e-4,
        "max_newton_iterations": 200,
        "bracket_limit":         1e12,
        "envelope_rtol":         1e-4,
        "envelope_steps":        40,
        "set_certify_tol":       1e-4,
        "affine_tol":            1e-9,
        "boundary_probe":        1e-3,
    }
    name_map: ClassVar = {
        'trust_radius':          "Radio de confianza dual",
        'outward_slope':         "Umbral de pendiente saliente",
        'gradient_tol':          "Tolerancia de gradiente de Newton",
        'certificate_tol':       "Tolerancia de certificado de primer orden",
        'gamma_rtol':            "Tolerancia relativa en gamma",
        'beta_tol':              "Tolerancia en beta",
        'objective_noise':       "Ruido admitido en la búsqueda áurea",
        'max_newton_iterations': "Iteraciones de Newton",
        'bracket_limit':         "Límite de expansión del intervalo",
        'envelope_rtol':         "Tolerancia de estabilización de la envolvente",
        'envelope_steps':        "Pasos de la envolvente",
        'set_certify_tol':       "Tolerancia de certificación del ínfimo sobre el conjunto",
        'affine_tol':            "Tolerancia de restricciones afines",
        'boundary_probe':        "Radio de sondeo del borde",
    }
    description_map: ClassVar = {
        'trust_radius':          "Radio de la bola de puntos duales donde se busca el supremo de J. Si el "
                                 "supremo sigue creciendo en ese radio, se informa como cota inferior.",
        'outward_slope':         "Pendiente direccional a partir de la cual un supremo detenido en el radio de "
                                 "confianza se considera no acotado.",
        'gradient_tol':          "Newton se detiene cuando la norma del gradiente reducido es menor que este "
                                 "valor por 1+|(s,w)|.",
        'certificate_tol':       "Máxima distancia entre la media inclinada y (s,w) para aceptar J como convergido.",
        'gamma_rtol':            "Ancho relativo en el que se detiene la búsqueda áurea sobre gamma.",
        'beta_tol':              "Ancho en el que se detiene la búsqueda áurea sobre beta.",
        'objective_noise':       "Error relativo del objetivo interno (J) que la búsqueda áurea tolera antes de "
                                 "considerarlo no unimodal. Un valor mayor acepta más ruido numérico; las "
                                 "violaciones por encima se informan como no convergidas.",
        'max_newton_iterations': "Máximo de iteraciones de la maximización cóncava de J.",
        'bracket_limit':         "Mayor cociente gamma/gamma_0 explorado al acotar el mínimo de la perspectiva.",
        'envelope_rtol':         "Cambio relativo bajo el cual el límite beta -> 0 de Upsilon se considera estable.",
        'envelope_steps':        "Cantidad de divisiones de beta a la mitad para Upsilon(0, w) con w != 0.",
        'set_certify_tol':       "Una grilla local alrededor del minimizador sobre el conjunto no debe mejorarlo "
                                 "en más que este valor.",
        'affine_tol':            "Tolerancia al chequear las restricciones afines del soporte del par.",
        'boundary_probe':        "Radio de la bola usada para marcar puntos cercanos al borde del dominio.",
    }

    def validate(self):
        super().validate()
        if self.outward_slope >= 1:
            raise ConfigError(f"Outward slope threshold must be small, got {self.outward_slope}")
        if self.objective_noise >= 1:
            raise ConfigError(f"Objective noise must be a small relative error, got {self.objective_noise}")

@dataclass(init=False)
class SimulationParameters(_Parameters):
    n_runs: int
    chunk_runs: int
    workers: int
    confidence: float
    max_renewals: int
    slack: float

    defaults: ClassVar = {
        "n_runs":         100_000,
        "chunk_runs":     10_000,
        "workers":        1,
        "confidence":     0.99,
        "max_renewals":   1_000_000_000,
        "slack":          0.05,
    }
    name_map: ClassVar = {
        'n_runs':         "Corridas por estimación",
        'chunk_runs':     "Corridas por bloque",
        'workers':        "Procesos",
        'confidence':     "Nivel de confianza",
        'max_renewals':   "Renovaciones por trayectoria",
        'slack':          "Holgura del veredicto",
    }
    description_map: ClassVar = {
        'n_runs':         "Cantidad de trayectorias independientes (o promedios de pares) por estimación de "
                          "probabilidad.",
        'chunk_runs':     "Las corridas se dividen en bloques de este tamaño. Cada bloque tiene su propio flujo "
                          "aleatorio, así el resultado no depende de la cantidad de procesos.",
        'workers':        "Cantidad de procesos de trabajo.",
        'confidence':     "Nivel de confianza de los intervalos de Clopper-Pearson.",
        'max_renewals':   "Una trayectoria con más renovaciones que este valor se aborta.",
        'slack':          "Holgura absoluta, en unidades de tasa, que se suma al ancho del intervalo al decidir "
                          "veredictos.",
    }

    def validate(self):
        super().validate()
        if not 0 < self.confidence < 1:
            raise ConfigError(f"Confidence level must lie in (0, 1), got {self.confidence}")
        if self.n_runs < 100:
            raise ConfigError(f"At least 100 runs are needed, got {self.n_runs}")
