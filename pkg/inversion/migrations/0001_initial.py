# Generated by Django 5.2.7 on 2026-10-18 10:12

from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='ExperimentRun',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('cas', models.CharField(choices=[('maxwell1d', 'Maxwell 1D'), ('maxwell2d', 'Maxwell 2D')], max_length=20)),
                ('mode', models.CharField(choices=[('da-pinn', 'da-PINN'), ('baseline', 'PINN de référence')], max_length=20)),
                ('statut', models.CharField(choices=[('en_cours', 'En cours'), ('termine', 'Terminé'), ('erreur', 'Erreur')], default='en_cours', max_length=20)),
                ('graine', models.IntegerField(default=0)),
                ('repertoire', models.CharField(help_text='Répertoire des artefacts du run', max_length=500)),
                ('configuration', models.JSONField(blank=True, default=dict)),
                ('parametres_estimes', models.JSONField(blank=True, default=dict, help_text='λ̂ = {mu1, eps1, mu2, eps2, d}')),
                ('erreurs_prediction', models.JSONField(blank=True, default=dict, help_text='Erreur relative l2 par champ')),
                ('nombre_iterations', models.IntegerField(default=0)),
                ('duree_secondes', models.FloatField(blank=True, null=True)),
                ('message_erreur', models.TextField(blank=True)),
                ('date_creation', models.DateTimeField(auto_now_add=True)),
                ('date_fin', models.DateTimeField(blank=True, null=True)),
            ],
            options={
                'verbose_name': "Run d'expérience",
                'verbose_name_plural': "Runs d'expérience",
                'ordering': ['-date_creation'],
            },
        ),
    ]
