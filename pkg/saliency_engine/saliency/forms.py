"""
Forms for the saliency engine web surface.

Forms included:
    VisualizeForm: Pick a saved model, upload a netpbm image, choose a method

Uploads are parsed here so that malformed images, oversized images and
images that do not fit the chosen model surface as form errors rather than
as failures inside the view.
"""

from django import forms

from .conf import app_settings
from .exceptions import ImageFormatError, ManifestError
from .imaging import parse_netpbm
from .models import ModelArtifact


class VisualizeForm(forms.Form):
    """
    Form for computing a saliency mask in the browser.

    Fields:
        artifact: Registered model to explain
        image: Binary P5 or P6 netpbm upload
        method: vbp or lrp; the other method is still computed for comparison
        epsilon: LRP stabilizer
        output_index: Output neuron to explain with LRP (blank for the default)
        show_intermediates: Render every VisualBackProp stage

    After validation ``cleaned_data`` also holds ``model`` (the loaded
    network) and the decoded ``image``.
    """
    METHOD_CHOICES = [
        ('vbp', 'VisualBackProp'),
        ('lrp', 'LRP (epsilon rule)'),
    ]

    artifact = forms.ModelChoiceField(queryset=ModelArtifact.objects.all(), empty_label=None)
    image = forms.FileField(help_text="Binary netpbm (P5 or P6, maxval 255)")
    method = forms.ChoiceField(choices=METHOD_CHOICES, initial='vbp')
    epsilon = forms.FloatField(min_value=0.0)
    output_index = forms.IntegerField(min_value=0, required=False)
    show_intermediates = forms.BooleanField(required=False)

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.fields['epsilon'].initial = app_settings.LRP_EPSILON
        for name in ('artifact', 'image', 'method', 'epsilon', 'output_index'):
            self.fields[name].widget.attrs.update({'class': 'form-input'})

    def clean_image(self):
        """
        Decode the upload and enforce the pixel limit.

        Returns:
            Image: Decoded image

        Raises:
            ValidationError: If the payload is not valid netpbm or too large
        """
        upload = self.cleaned_data.get('image')
        try:
            image = parse_netpbm(upload.read())
        except ImageFormatError as exc:
            raise forms.ValidationError(f"Could not read image: {exc}")
        limit = app_settings.MAX_UPLOAD_PIXELS
        if image.width * image.height > limit:
            raise forms.ValidationError(f"Image has {image.width * image.height} pixels; the limit is {limit}.")
        return image

    def clean(self):
        cleaned_data = super().clean()
        artifact = cleaned_data.get('artifact')
        image = cleaned_data.get('image')
        if artifact is None or image is None:
            return cleaned_data
        try:
            model = artifact.load()
        except (ManifestError, OSError) as exc:
            raise forms.ValidationError(f"Model {artifact.name} cannot be loaded: {exc}")
        expected = model.input_shape
        actual = (image.channels, image.height, image.width)
        if actual != expected:
            self.add_error('image', f"Image is {ModelArtifact.shape_label(actual)}; "
                                    f"{artifact.name} expects {ModelArtifact.shape_label(expected)}.")
        cleaned_data['model'] = model
        return cleaned_data
