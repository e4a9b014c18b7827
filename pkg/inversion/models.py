from django.db import models


class ExperimentRun(models.Model):
    """Registre des runs d'entraînement (les artefacts restent la source de vérité)"""
    CAS_CHOICES = [
        ('maxwell1d', 'Maxwell 1D'),
        ('maxwell2d', 'Maxwell 2D'),
    ]

    MODE_CHOICES = [
        ('da-pinn', 'da-PINN'),
        ('baseline', 'PINN de référence'),
    ]

    STATUT_CHOICES = [
        ('en_cours', 'En cours'),
        ('termine', 'Terminé'),
        ('erreur', 'Erreur'),
    ]

    cas = models.CharField(max_length=20, choices=CAS_CHOICES)
    mode = models.CharField(max_length=20, choices=MODE_CHOICES)
    statut = models.CharField(max_length=20, choices=STATUT_CHOICES, default='en_cours')
    graine = models.IntegerField(default=0)
    repertoire = models.CharField(max_length=500, help_text="Répertoire des artefacts du run")
    configuration = models.JSONField(default=dict, blank=True)
    parametres_estimes = models.JSONField(default=dict, blank=True, help_text="λ̂ = {mu1, eps1, mu2, eps2, d}")
    erreurs_prediction = models.JSONField(default=dict, blank=True, help_text="Erreur relative l2 par champ")
    nombre_iterations = models.IntegerField(default=0)
    duree_secondes = models.FloatField(null=True, blank=True)
    message_erreur = models.TextField(blank=True)
    date_creation = models.DateTimeField(auto_now_add=True)
    date_fin = models.DateTimeField(null=True, blank=True)

    class Meta:
        verbose_name = "Run d'expérience"
        verbose_name_plural = "Runs d'expérience"
        ordering = ['-date_creation']

    def __str__(self):
        return f"{self.cas} / {self.mode} (graine {self.graine}, {self.statut})"
