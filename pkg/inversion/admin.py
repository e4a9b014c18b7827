from django.contrib import admin

from .models import ExperimentRun


@admin.register(ExperimentRun)
class ExperimentRunAdmin(admin.ModelAdmin):
    list_display = ['id', 'cas', 'mode', 'graine', 'statut', 'nombre_iterations', 'date_creation']
    list_filter = ['cas', 'mode', 'statut', 'date_creation']
    search_fields = ['repertoire', 'message_erreur']
    ordering = ['-date_creation']
    readonly_fields = ['date_creation', 'date_fin']

    fieldsets = (
        ('Expérience', {
            'fields': ('cas', 'mode', 'graine', 'statut', 'repertoire')
        }),
        ('Résultats', {
            'fields': ('parametres_estimes', 'erreurs_prediction', 'nombre_iterations', 'duree_secondes')
        }),
        ('Configuration', {
            'fields': ('configuration', 'message_erreur'),
            'classes': ('collapse',)
        }),
        ('Dates', {
            'fields': ('date_creation', 'date_fin')
        }),
    )
